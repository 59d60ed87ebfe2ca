#include "nexus/app_machine.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>

#include "nexus/errors.hpp"

namespace nexus {

const char* to_string(Role r) {
    switch (r) {
        case Role::Button: return "button";
        case Role::Text: return "text";
        case Role::Input: return "input";
        case Role::ListItem: return "list-item";
        case Role::Toggle: return "toggle";
        case Role::Icon: return "icon";
    }
    return "text";
}

uint64_t fnv1a64(const std::string& bytes, uint64_t seed) {
    uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string sanitize_id_fragment(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (std::isalnum(static_cast<unsigned char>(c)))
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        else
            out += '_';
    }
    return out;
}

const Screen& AppMachine::screen(const std::string& screen_id) const {
    auto it = screens.find(screen_id);
    if (it == screens.end()) throw Error("app " + id + " has no screen " + screen_id);
    return it->second;
}

const Transition* AppMachine::find_transition(const std::string& screen_id,
                                              const std::string& element_id) const {
    for (const auto& t : transitions) {
        if (t.screen != screen_id) continue;
        if (!t.element.empty() && t.element == element_id) return &t;
        if (!t.element_prefix.empty() && element_id.size() > t.element_prefix.size() &&
            element_id.compare(0, t.element_prefix.size(), t.element_prefix) == 0 &&
            element_id[t.element_prefix.size()] == '.')
            return &t;
    }
    return nullptr;
}

namespace {

ElementTemplate parse_element(const nlohmann::json& j) {
    ElementTemplate e;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "button") {
        e.kind = ElementTemplate::Kind::Button;
        e.id = j.at("id").get<std::string>();
        e.label = j.value("label", std::string{});
    } else if (kind == "text") {
        e.kind = ElementTemplate::Kind::Text;
        e.id = j.at("id").get<std::string>();
        e.label = j.value("label", std::string{});
        e.source = j.at("source").get<std::string>();
    } else if (kind == "input") {
        e.kind = ElementTemplate::Kind::Input;
        e.id = j.at("id").get<std::string>();
        e.label = j.value("label", std::string{});
        e.buffer = j.at("buffer").get<std::string>();
    } else if (kind == "list" || kind == "toggle_list") {
        e.kind = kind == "list" ? ElementTemplate::Kind::List : ElementTemplate::Kind::ToggleList;
        e.collection = j.at("collection").get<std::string>();
        e.id_prefix = j.at("id_prefix").get<std::string>();
        e.id_field = j.value("id_field", std::string{});
        e.label_template = j.value("label_template", std::string{});
        e.value_field = j.value("value_field", std::string{});
        if (j.contains("filter")) {
            const auto& f = j.at("filter");
            e.filter_field = f.at("field").get<std::string>();
            e.filter_collection = f.at("selected_collection").get<std::string>();
            e.filter_selected_field = f.at("selected_field").get<std::string>();
        }
    } else {
        throw Error("unknown element kind: " + kind);
    }
    return e;
}

Effect parse_effect(const nlohmann::json& j) {
    Effect e;
    const std::string op = j.at("op").get<std::string>();
    if (op == "clear_buffers") {
        e.op = Effect::Op::ClearBuffers;
    } else if (op == "clear_buffer") {
        e.op = Effect::Op::ClearBuffer;
        e.buffer = j.at("buffer").get<std::string>();
    } else if (op == "select") {
        e.op = Effect::Op::Select;
        e.collection = j.at("collection").get<std::string>();
    } else if (op == "append") {
        e.op = Effect::Op::Append;
        e.collection = j.at("collection").get<std::string>();
        for (const auto& [field, src] : j.at("fields").items()) {
            FieldSource fs;
            if (src.is_string()) {
                fs.from = src.get<std::string>();
            } else if (src.is_object() && src.contains("const")) {
                fs.const_value = src.at("const");
            } else {
                fs.from = src.at("from").get<std::string>();
                fs.as_number = src.value("as", std::string{}) == "number";
            }
            e.fields[field] = fs;
        }
    } else {
        throw Error("unknown effect op: " + op);
    }
    return e;
}

void validate_machine(const AppMachine& app) {
    if (!app.screens.count(app.home_screen))
        throw Error("app " + app.id + ": home screen " + app.home_screen + " not defined");
    auto require_collection = [&](const std::string& c, const std::string& where) {
        if (!app.collections.count(c))
            throw Error("app " + app.id + ": " + where + " references unknown collection " + c);
    };
    for (const auto& [sid, screen] : app.screens) {
        for (const auto& e : screen.elements) {
            if (e.kind == ElementTemplate::Kind::List ||
                e.kind == ElementTemplate::Kind::ToggleList)
                require_collection(e.collection, "screen " + sid);
        }
    }
    for (const auto& t : app.transitions) {
        if (!app.screens.count(t.screen))
            throw Error("app " + app.id + ": transition from unknown screen " + t.screen);
        if (!t.push.empty() && !app.screens.count(t.push))
            throw Error("app " + app.id + ": transition target screen " + t.push + " not defined");
        if (!t.replace.empty() && !app.screens.count(t.replace))
            throw Error("app " + app.id + ": transition target screen " + t.replace +
                        " not defined");
        for (const auto& e : t.effects) {
            if (e.op == Effect::Op::Select || e.op == Effect::Op::Append)
                require_collection(e.collection, "transition effect");
        }
    }
    for (const auto& [coll, records] : app.seed_records) {
        auto it = app.collections.find(coll);
        if (it == app.collections.end())
            throw Error("app " + app.id + ": seed records for unknown collection " + coll);
        for (const auto& r : records) {
            for (const auto& [field, _] : r.items()) {
                const auto& fields = it->second.fields;
                if (std::find(fields.begin(), fields.end(), field) == fields.end())
                    throw Error("app " + app.id + ": seed record field " + field +
                                " not in schema of " + coll);
            }
        }
    }
}

}  // namespace

AppMachine load_app_machine(const nlohmann::json& j) {
    AppMachine app;
    app.id = j.at("id").get<std::string>();
    app.label = j.value("label", app.id);
    app.home_screen = j.at("home_screen").get<std::string>();
    if (j.contains("collections")) {
        for (const auto& [name, spec] : j.at("collections").items()) {
            CollectionSchema schema;
            schema.fields = spec.at("fields").get<std::vector<std::string>>();
            app.collections[name] = schema;
        }
    }
    if (j.contains("seed_records")) {
        for (const auto& [name, records] : j.at("seed_records").items())
            app.seed_records[name] = records.get<std::vector<nlohmann::json>>();
    }
    for (const auto& [sid, spec] : j.at("screens").items()) {
        Screen s;
        s.id = sid;
        for (const auto& el : spec.at("elements")) s.elements.push_back(parse_element(el));
        app.screens[sid] = s;
    }
    if (j.contains("transitions")) {
        for (const auto& t : j.at("transitions")) {
            Transition tr;
            tr.screen = t.at("screen").get<std::string>();
            tr.element = t.value("element", std::string{});
            tr.element_prefix = t.value("element_prefix", std::string{});
            tr.push = t.value("push", std::string{});
            tr.replace = t.value("replace", std::string{});
            tr.pop = t.value("pop", false);
            if (t.contains("effects"))
                for (const auto& e : t.at("effects")) tr.effects.push_back(parse_effect(e));
            app.transitions.push_back(tr);
        }
    }
    validate_machine(app);
    return app;
}

AppMachine load_app_machine_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open app file: " + path);
    nlohmann::json j;
    in >> j;
    return load_app_machine(j);
}

DeviceConfig::DeviceConfig(std::vector<AppMachine> apps) : apps_(std::move(apps)) {
    std::string blob;
    for (size_t i = 0; i < apps_.size(); ++i) {
        if (index_.count(apps_[i].id)) throw Error("duplicate app id: " + apps_[i].id);
        index_[apps_[i].id] = i;
        // Fingerprint from the identifying structure, not the parsed object
        // layout: ids, screens and schema field lists.
        blob += apps_[i].id + "{";
        for (const auto& [sid, s] : apps_[i].screens) blob += sid + ";";
        for (const auto& [c, schema] : apps_[i].collections) {
            blob += c + "(";
            for (const auto& f : schema.fields) blob += f + ",";
            blob += ")";
        }
        blob += "}";
    }
    fingerprint_ = fnv1a64(blob);
    system_schema_["answers"] = CollectionSchema{{"text"}};
}

const AppMachine* DeviceConfig::find(const std::string& app_id) const {
    auto it = index_.find(app_id);
    return it == index_.end() ? nullptr : &apps_[it->second];
}

const std::map<std::string, CollectionSchema>* DeviceConfig::schemas_for(
    const std::string& app_id) const {
    if (app_id == "system") return &system_schema_;
    const AppMachine* app = find(app_id);
    return app ? &app->collections : nullptr;
}

DeviceConfigPtr load_device_config(const std::string& apps_dir) {
    namespace fs = std::filesystem;
    std::vector<std::string> paths;
    if (!fs::is_directory(apps_dir)) throw Error("apps directory not found: " + apps_dir);
    for (const auto& entry : fs::directory_iterator(apps_dir)) {
        if (entry.path().extension() == ".json") paths.push_back(entry.path().string());
    }
    std::sort(paths.begin(), paths.end());
    std::vector<AppMachine> apps;
    for (const auto& p : paths) apps.push_back(load_app_machine_file(p));
    return std::make_shared<DeviceConfig>(std::move(apps));
}

}  // namespace nexus

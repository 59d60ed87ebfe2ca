#include "nexus/env.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "nexus/errors.hpp"

namespace nexus {

Action Action::tap(std::string element_id) {
    Action a;
    a.kind = Kind::Tap;
    a.target = std::move(element_id);
    return a;
}

Action Action::type_text(std::string text) {
    Action a;
    a.kind = Kind::Type;
    a.text = std::move(text);
    return a;
}

Action Action::swipe(SwipeDir d) {
    Action a;
    a.kind = Kind::Swipe;
    a.dir = d;
    return a;
}

Action Action::back() {
    Action a;
    a.kind = Kind::Back;
    return a;
}

Action Action::home() {
    Action a;
    a.kind = Kind::Home;
    return a;
}

Action Action::stop(std::optional<std::string> answer) {
    Action a;
    a.kind = Kind::Stop;
    if (answer) {
        a.has_answer = true;
        a.text = std::move(*answer);
    }
    return a;
}

const char* to_string(SwipeDir d) {
    switch (d) {
        case SwipeDir::Up: return "up";
        case SwipeDir::Down: return "down";
        case SwipeDir::Left: return "left";
        case SwipeDir::Right: return "right";
    }
    return "up";
}

SwipeDir swipe_dir_from_string(const std::string& s) {
    if (s == "up") return SwipeDir::Up;
    if (s == "down") return SwipeDir::Down;
    if (s == "left") return SwipeDir::Left;
    if (s == "right") return SwipeDir::Right;
    throw Error("unknown swipe direction: " + s);
}

static std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    out += '"';
    return out;
}

std::string Action::to_string() const {
    switch (kind) {
        case Kind::Tap: return "Tap(" + target + ")";
        case Kind::Type: return "Type(" + quote(text) + ")";
        case Kind::Swipe: return std::string("Swipe(") + nexus::to_string(dir) + ")";
        case Kind::Back: return "Back";
        case Kind::Home: return "Home";
        case Kind::Stop: return has_answer ? "Stop(" + quote(text) + ")" : "Stop";
    }
    return "Home";
}

bool Action::operator==(const Action& other) const {
    return kind == other.kind && target == other.target && text == other.text &&
           has_answer == other.has_answer && (kind != Kind::Swipe || dir == other.dir);
}

void to_json(nlohmann::json& j, const Action& a) {
    j = nlohmann::json::object();
    switch (a.kind) {
        case Action::Kind::Tap:
            j["kind"] = "tap";
            j["target"] = a.target;
            break;
        case Action::Kind::Type:
            j["kind"] = "type";
            j["text"] = a.text;
            break;
        case Action::Kind::Swipe:
            j["kind"] = "swipe";
            j["dir"] = to_string(a.dir);
            break;
        case Action::Kind::Back: j["kind"] = "back"; break;
        case Action::Kind::Home: j["kind"] = "home"; break;
        case Action::Kind::Stop:
            j["kind"] = "stop";
            if (a.has_answer) j["answer"] = a.text;
            break;
    }
}

void from_json(const nlohmann::json& j, Action& a) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "tap") {
        a = Action::tap(j.at("target").get<std::string>());
    } else if (kind == "type") {
        a = Action::type_text(j.at("text").get<std::string>());
    } else if (kind == "swipe") {
        a = Action::swipe(swipe_dir_from_string(j.at("dir").get<std::string>()));
    } else if (kind == "back") {
        a = Action::back();
    } else if (kind == "home") {
        a = Action::home();
    } else if (kind == "stop") {
        a = j.contains("answer") ? Action::stop(j.at("answer").get<std::string>())
                                 : Action::stop();
    } else {
        throw Error("unknown action kind: " + kind);
    }
}

nlohmann::json EnvState::to_json_value() const {
    nlohmann::json apps_j = nlohmann::json::object();
    for (const auto& [id, rt] : apps) {
        apps_j[id] = {{"stack", rt.screen_stack},
                      {"buffers", rt.buffers},
                      {"selection", rt.selection},
                      {"focus", rt.focus}};
    }
    return {{"foreground", foreground},
            {"step_count", step_count},
            {"rng_seed", rng_seed},
            {"apps", apps_j},
            {"stores", stores}};
}

EnvState EnvState::from_json_value(const nlohmann::json& j, DeviceConfigPtr device) {
    EnvState s;
    s.device = std::move(device);
    s.foreground = j.at("foreground").get<std::string>();
    s.step_count = j.at("step_count").get<long>();
    s.rng_seed = j.at("rng_seed").get<long>();
    for (const auto& [id, rt] : j.at("apps").items()) {
        AppRuntime r;
        r.screen_stack = rt.at("stack").get<std::vector<std::string>>();
        r.buffers = rt.at("buffers").get<std::map<std::string, std::string>>();
        r.selection = rt.at("selection").get<std::map<std::string, long>>();
        r.focus = rt.at("focus").get<std::string>();
        s.apps[id] = r;
    }
    s.stores = j.at("stores").get<std::map<std::string, Store>>();
    // Normalize against the registry so step() stays total on hand-written
    // snapshots: every registered app gets a runtime entry and store.
    if (s.device) {
        for (const auto& app : s.device->apps()) {
            if (!s.apps.count(app.id)) s.apps[app.id] = AppRuntime{{app.home_screen}, {}, {}, {}};
            if (s.apps[app.id].screen_stack.empty())
                s.apps[app.id].screen_stack = {app.home_screen};
            Store& store = s.stores[app.id];
            for (const auto& [coll, _] : app.collections)
                if (!store.count(coll)) store[coll] = {};
        }
        s.stores["system"]["answers"];
    }
    return s;
}

uint64_t state_hash(const EnvState& s) {
    // Canonical dump: nlohmann objects are key-sorted, doubles use
    // shortest-roundtrip formatting, so the bytes are platform-stable.
    const std::string dump = s.to_json_value().dump();
    const uint64_t config = s.device ? s.device->fingerprint() : 0;
    return fnv1a64(std::to_string(config) + "|" + dump);
}

std::string state_hash_hex(const EnvState& s) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(state_hash(s)));
    return std::string(buf);
}

namespace {

std::string stringify(const nlohmann::json& v) {
    if (v.is_null()) return "";
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
}

std::string fill_label_template(const std::string& tmpl, const nlohmann::json& record) {
    std::string out;
    size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            size_t close = tmpl.find('}', i + 1);
            if (close == std::string::npos) {
                out += tmpl[i++];
                continue;
            }
            std::string field = tmpl.substr(i + 1, close - i - 1);
            out += stringify(record.value(field, nlohmann::json()));
            i = close + 1;
        } else {
            out += tmpl[i++];
        }
    }
    return out;
}

std::string list_item_suffix(const ElementTemplate& tmpl, const nlohmann::json& record,
                             size_t index) {
    if (!tmpl.id_field.empty())
        return sanitize_id_fragment(stringify(record.value(tmpl.id_field, nlohmann::json())));
    return std::to_string(index);
}

const std::vector<nlohmann::json>& store_records(const EnvState& s, const std::string& app_id,
                                                 const std::string& collection) {
    static const std::vector<nlohmann::json> empty;
    auto sit = s.stores.find(app_id);
    if (sit == s.stores.end()) return empty;
    auto cit = sit->second.find(collection);
    return cit == sit->second.end() ? empty : cit->second;
}

// Indices of records kept by a list template's filter (all when unfiltered).
std::vector<size_t> filtered_indices(const EnvState& s, const std::string& app_id,
                                     const AppRuntime& rt, const ElementTemplate& tmpl) {
    const auto& records = store_records(s, app_id, tmpl.collection);
    std::vector<size_t> out;
    if (tmpl.filter_field.empty()) {
        for (size_t i = 0; i < records.size(); ++i) out.push_back(i);
        return out;
    }
    auto sel = rt.selection.find(tmpl.filter_collection);
    if (sel == rt.selection.end()) return out;
    const auto& sel_records = store_records(s, app_id, tmpl.filter_collection);
    if (sel->second < 0 || sel->second >= static_cast<long>(sel_records.size())) return out;
    const std::string wanted =
        stringify(sel_records[sel->second].value(tmpl.filter_selected_field, nlohmann::json()));
    for (size_t i = 0; i < records.size(); ++i) {
        if (stringify(records[i].value(tmpl.filter_field, nlohmann::json())) == wanted)
            out.push_back(i);
    }
    return out;
}

std::string resolve_text_source(const EnvState& s, const std::string& app_id,
                                const AppRuntime& rt, const std::string& source) {
    if (source.rfind("const:", 0) == 0) return source.substr(6);
    if (source.rfind("selected:", 0) == 0) {
        std::string rest = source.substr(9);
        size_t dot = rest.find('.');
        if (dot == std::string::npos) return "";
        std::string collection = rest.substr(0, dot);
        std::string field = rest.substr(dot + 1);
        auto sel = rt.selection.find(collection);
        if (sel == rt.selection.end()) return "";
        const auto& records = store_records(s, app_id, collection);
        if (sel->second < 0 || sel->second >= static_cast<long>(records.size())) return "";
        return stringify(records[sel->second].value(field, nlohmann::json()));
    }
    return "";
}

}  // namespace

Observation observe(const EnvState& s) {
    Observation obs;
    obs.foreground = s.foreground;
    if (s.foreground == "home") {
        obs.screen = "launcher";
        if (s.device) {
            for (const auto& app : s.device->apps()) {
                obs.elements.push_back({"icon." + app.id, Role::Icon, app.label, std::nullopt, true});
            }
        }
        return obs;
    }
    const AppMachine* app = s.device ? s.device->find(s.foreground) : nullptr;
    if (!app) {
        obs.screen = "unknown";
        return obs;
    }
    static const AppRuntime empty_runtime;
    auto rt_it = s.apps.find(app->id);
    const AppRuntime& rt = rt_it == s.apps.end() ? empty_runtime : rt_it->second;
    const std::string screen_id = rt.screen_stack.empty() ? app->home_screen : rt.screen_stack.back();
    obs.screen = screen_id;
    const Screen& screen = app->screen(screen_id);
    for (const auto& tmpl : screen.elements) {
        switch (tmpl.kind) {
            case ElementTemplate::Kind::Button:
                obs.elements.push_back({tmpl.id, Role::Button, tmpl.label, std::nullopt, true});
                break;
            case ElementTemplate::Kind::Text:
                obs.elements.push_back({tmpl.id, Role::Text, tmpl.label,
                                        resolve_text_source(s, app->id, rt, tmpl.source), false});
                break;
            case ElementTemplate::Kind::Input: {
                auto it = rt.buffers.find(tmpl.buffer);
                obs.elements.push_back({tmpl.id, Role::Input, tmpl.label,
                                        it == rt.buffers.end() ? std::string{} : it->second, true});
                break;
            }
            case ElementTemplate::Kind::List: {
                const auto& records = store_records(s, app->id, tmpl.collection);
                for (size_t idx : filtered_indices(s, app->id, rt, tmpl)) {
                    const std::string id =
                        tmpl.id_prefix + "." + list_item_suffix(tmpl, records[idx], idx);
                    obs.elements.push_back({id, Role::ListItem,
                                            fill_label_template(tmpl.label_template, records[idx]),
                                            std::nullopt,
                                            app->find_transition(screen_id, id) != nullptr});
                }
                break;
            }
            case ElementTemplate::Kind::ToggleList: {
                const auto& records = store_records(s, app->id, tmpl.collection);
                for (size_t idx : filtered_indices(s, app->id, rt, tmpl)) {
                    const std::string id =
                        tmpl.id_prefix + "." + list_item_suffix(tmpl, records[idx], idx);
                    const bool on = records[idx].value(tmpl.value_field, nlohmann::json(false)) ==
                                    nlohmann::json(true);
                    obs.elements.push_back({id, Role::Toggle,
                                            fill_label_template(tmpl.label_template, records[idx]),
                                            std::string(on ? "on" : "off"), true});
                }
                break;
            }
        }
    }
    return obs;
}

std::string Observation::flat_text() const {
    std::ostringstream out;
    out << "app: " << foreground << "\n";
    out << "screen: " << screen << "\n";
    for (const auto& e : elements) {
        out << "[" << e.id << "] " << to_string(e.role) << " \"" << e.label << "\"";
        if (e.value) out << " = \"" << *e.value << "\"";
        if (e.actionable) out << " (actionable)";
        out << "\n";
    }
    return out.str();
}

namespace {

struct TapContext {
    EnvState& s;
    const AppMachine& app;
    AppRuntime& rt;
    const std::string& screen_id;
};

long record_index_for_suffix(const EnvState& s, const std::string& app_id,
                             const ElementTemplate& tmpl, const std::string& suffix) {
    const auto& records = store_records(s, app_id, tmpl.collection);
    if (!tmpl.id_field.empty()) {
        for (size_t i = 0; i < records.size(); ++i) {
            if (sanitize_id_fragment(stringify(records[i].value(tmpl.id_field, nlohmann::json()))) ==
                suffix)
                return static_cast<long>(i);
        }
        return -1;
    }
    char* end = nullptr;
    long idx = std::strtol(suffix.c_str(), &end, 10);
    if (end == suffix.c_str() || *end != '\0') return -1;
    if (idx < 0 || idx >= static_cast<long>(records.size())) return -1;
    return idx;
}

const ElementTemplate* template_for_element(const Screen& screen, const std::string& element_id,
                                            std::string* suffix_out) {
    for (const auto& tmpl : screen.elements) {
        if (tmpl.kind == ElementTemplate::Kind::List ||
            tmpl.kind == ElementTemplate::Kind::ToggleList) {
            const std::string prefix = tmpl.id_prefix + ".";
            if (element_id.rfind(prefix, 0) == 0) {
                *suffix_out = element_id.substr(prefix.size());
                return &tmpl;
            }
        } else if (tmpl.id == element_id) {
            suffix_out->clear();
            return &tmpl;
        }
    }
    return nullptr;
}

nlohmann::json resolve_field_source(const TapContext& ctx, const FieldSource& src) {
    if (src.const_value) return *src.const_value;
    nlohmann::json value;
    if (src.from.rfind("buffer:", 0) == 0) {
        auto it = ctx.rt.buffers.find(src.from.substr(7));
        value = it == ctx.rt.buffers.end() ? std::string{} : it->second;
    } else if (src.from.rfind("selection:", 0) == 0) {
        std::string rest = src.from.substr(10);
        size_t dot = rest.find('.');
        std::string collection = rest.substr(0, dot);
        std::string field = rest.substr(dot + 1);
        auto sel = ctx.rt.selection.find(collection);
        const auto& records = store_records(ctx.s, ctx.app.id, collection);
        if (sel != ctx.rt.selection.end() && sel->second >= 0 &&
            sel->second < static_cast<long>(records.size()))
            value = records[sel->second].value(field, nlohmann::json());
        else
            value = std::string{};
    } else if (src.from.rfind("const:", 0) == 0) {
        value = src.from.substr(6);
    } else {
        value = std::string{};
    }
    if (src.as_number) {
        double d = 0.0;
        if (value.is_number()) {
            d = value.get<double>();
        } else if (value.is_string()) {
            const std::string& text = value.get_ref<const std::string&>();
            char* end = nullptr;
            d = std::strtod(text.c_str(), &end);
            if (end == text.c_str()) d = 0.0;
        }
        value = d;
    }
    return value;
}

EffectReport apply_transition(TapContext& ctx, const Transition& tr,
                              const std::string& element_id) {
    for (const auto& eff : tr.effects) {
        switch (eff.op) {
            case Effect::Op::ClearBuffers:
                ctx.rt.buffers.clear();
                ctx.rt.focus.clear();
                break;
            case Effect::Op::ClearBuffer:
                ctx.rt.buffers.erase(eff.buffer);
                if (ctx.rt.focus == eff.buffer) ctx.rt.focus.clear();
                break;
            case Effect::Op::Select: {
                std::string sfx;
                const ElementTemplate* tmpl =
                    template_for_element(ctx.app.screen(ctx.screen_id), element_id, &sfx);
                if (tmpl) {
                    long idx = record_index_for_suffix(ctx.s, ctx.app.id, *tmpl, sfx);
                    if (idx >= 0) ctx.rt.selection[eff.collection] = idx;
                }
                break;
            }
            case Effect::Op::Append: {
                nlohmann::json record = nlohmann::json::object();
                for (const auto& [field, src] : eff.fields)
                    record[field] = resolve_field_source(ctx, src);
                ctx.s.stores[ctx.app.id][eff.collection].push_back(record);
                break;
            }
        }
    }
    if (!tr.push.empty()) {
        ctx.rt.screen_stack.push_back(tr.push);
        ctx.rt.focus.clear();
    } else if (!tr.replace.empty()) {
        ctx.rt.screen_stack.back() = tr.replace;
        ctx.rt.focus.clear();
    } else if (tr.pop) {
        if (ctx.rt.screen_stack.size() > 1) ctx.rt.screen_stack.pop_back();
        ctx.rt.focus.clear();
    }
    return {false, "tapped " + element_id};
}

EffectReport do_tap(EnvState& s, const std::string& element_id) {
    if (s.foreground == "home") {
        if (element_id.rfind("icon.", 0) == 0) {
            const std::string app_id = element_id.substr(5);
            if (s.device && s.device->has(app_id)) {
                s.foreground = app_id;
                return {false, "opened " + app_id};
            }
        }
        return {true, "no-op: no element " + element_id + " on the home screen"};
    }
    const AppMachine* app = s.device ? s.device->find(s.foreground) : nullptr;
    if (!app || !s.apps.count(app->id))
        return {true, "no-op: foreground app " + s.foreground + " is not registered"};
    AppRuntime& rt = s.apps.at(app->id);
    const std::string screen_id = rt.screen_stack.empty() ? app->home_screen : rt.screen_stack.back();

    // First locate the element in the rendered tree; invalid or non-actionable
    // targets only consume the step.
    const Observation obs = observe(s);
    const ElementNode* node = nullptr;
    for (const auto& e : obs.elements)
        if (e.id == element_id) node = &e;
    if (!node) return {true, "no-op: no element " + element_id};
    if (!node->actionable) return {true, "no-op: element " + element_id + " not actionable"};

    std::string suffix;
    const ElementTemplate* tmpl = template_for_element(app->screen(screen_id), element_id, &suffix);
    if (!tmpl) return {true, "no-op: no element " + element_id};

    if (tmpl->kind == ElementTemplate::Kind::ToggleList) {
        long idx = record_index_for_suffix(s, app->id, *tmpl, suffix);
        if (idx < 0) return {true, "no-op: no element " + element_id};
        auto& record = s.stores[app->id][tmpl->collection][idx];
        const bool now = !(record.value(tmpl->value_field, nlohmann::json(false)) ==
                           nlohmann::json(true));
        record[tmpl->value_field] = now;
        return {false, "toggled " + node->label + (now ? " on" : " off")};
    }
    if (tmpl->kind == ElementTemplate::Kind::Input) {
        rt.focus = tmpl->buffer;
        return {false, "focused input " + tmpl->buffer};
    }
    const Transition* tr = app->find_transition(screen_id, element_id);
    if (!tr) return {true, "no-op: element " + element_id + " is inert"};
    TapContext ctx{s, *app, rt, screen_id};
    return apply_transition(ctx, *tr, element_id);
}

}  // namespace

StepOutcome step(const EnvState& s, const Action& a) {
    StepOutcome out{s, {}};
    EnvState& n = out.state;
    n.step_count += 1;
    switch (a.kind) {
        case Action::Kind::Home:
            n.foreground = "home";
            out.report = {false, "foreground set to home"};
            break;
        case Action::Kind::Back: {
            if (n.foreground == "home") {
                out.report = {true, "no-op: already at home"};
                break;
            }
            if (!n.apps.count(n.foreground)) {
                n.foreground = "home";
                out.report = {false, "left unregistered app"};
                break;
            }
            AppRuntime& rt = n.apps.at(n.foreground);
            if (rt.screen_stack.size() > 1) {
                rt.screen_stack.pop_back();
                rt.focus.clear();
                out.report = {false, "back to " + rt.screen_stack.back()};
            } else {
                const std::string app = n.foreground;
                n.foreground = "home";
                out.report = {false, "left " + app};
            }
            break;
        }
        case Action::Kind::Swipe:
            out.report = {true, std::string("no-op: swipe ") + to_string(a.dir) +
                                    " has nothing to scroll"};
            break;
        case Action::Kind::Type: {
            if (a.text.size() > 4096) {
                out.report = {true, "no-op: text exceeds 4096 characters"};
                break;
            }
            if (n.foreground == "home" || !n.apps.count(n.foreground)) {
                out.report = {true, "no-op: no focused input"};
                break;
            }
            AppRuntime& rt = n.apps.at(n.foreground);
            if (rt.focus.empty()) {
                out.report = {true, "no-op: no focused input"};
                break;
            }
            rt.buffers[rt.focus] = a.text;
            out.report = {false, "typed into " + rt.focus};
            break;
        }
        case Action::Kind::Stop:
            if (a.has_answer) {
                n.stores["system"]["answers"].push_back({{"text", a.text}});
                out.report = {false, "stopped with answer"};
            } else {
                out.report = {false, "stopped"};
            }
            break;
        case Action::Kind::Tap: out.report = do_tap(n, a.target); break;
    }
    return out;
}

Goal Goal::from_task(const CompositionalTask& task, std::optional<int> horizon_override) {
    Goal g;
    g.instruction = task.instruction;
    g.checkpoints = task.checkpoints;
    g.logic = task.logic;
    g.horizon = horizon_override ? *horizon_override : 2 * task.optimal_steps;
    return g;
}

namespace {

struct ParsedPath {
    std::string collection;
    enum class Sel { None, All, Index, Filter } sel = Sel::None;
    long index = 0;
    std::string filter_field;
    std::string filter_value;
    std::string field;
};

ParsedPath parse_path(const std::string& path) {
    ParsedPath p;
    size_t i = path.find_first_of("[.");
    if (i == std::string::npos) {
        p.collection = path;
        return p;
    }
    p.collection = path.substr(0, i);
    if (path[i] == '[') {
        size_t close = path.find(']', i);
        if (close == std::string::npos)
            throw SchemaMismatchError("malformed checkpoint path: " + path);
        std::string sel = path.substr(i + 1, close - i - 1);
        if (sel == "*") {
            p.sel = ParsedPath::Sel::All;
        } else if (sel.find('=') != std::string::npos) {
            size_t eq = sel.find('=');
            p.sel = ParsedPath::Sel::Filter;
            p.filter_field = sel.substr(0, eq);
            p.filter_value = sel.substr(eq + 1);
        } else {
            p.sel = ParsedPath::Sel::Index;
            char* end = nullptr;
            p.index = std::strtol(sel.c_str(), &end, 10);
            if (end == sel.c_str() || *end != '\0')
                throw SchemaMismatchError("malformed selector in checkpoint path: " + path);
        }
        i = close + 1;
        if (i < path.size()) {
            if (path[i] != '.')
                throw SchemaMismatchError("malformed checkpoint path: " + path);
            p.field = path.substr(i + 1);
        }
    } else {
        p.sel = ParsedPath::Sel::All;
        p.field = path.substr(i + 1);
    }
    return p;
}

void check_against_schema(const ParsedPath& p, const std::string& app,
                          const std::map<std::string, CollectionSchema>& schemas) {
    auto it = schemas.find(p.collection);
    if (it == schemas.end())
        throw SchemaMismatchError("app " + app + " has no collection " + p.collection);
    auto has_field = [&](const std::string& f) {
        return std::find(it->second.fields.begin(), it->second.fields.end(), f) !=
               it->second.fields.end();
    };
    if (!p.field.empty() && !has_field(p.field))
        throw SchemaMismatchError("collection " + p.collection + " has no field " + p.field);
    if (p.sel == ParsedPath::Sel::Filter && !has_field(p.filter_field))
        throw SchemaMismatchError("collection " + p.collection + " has no field " +
                                  p.filter_field);
}

std::vector<nlohmann::json> resolve_values(const EnvState& s, const std::string& app,
                                           const ParsedPath& p) {
    const auto& records = store_records(s, app, p.collection);
    std::vector<nlohmann::json> selected;
    switch (p.sel) {
        case ParsedPath::Sel::None:
        case ParsedPath::Sel::All:
            selected.assign(records.begin(), records.end());
            break;
        case ParsedPath::Sel::Index: {
            long idx = p.index >= 0 ? p.index : static_cast<long>(records.size()) + p.index;
            if (idx >= 0 && idx < static_cast<long>(records.size()))
                selected.push_back(records[idx]);
            break;
        }
        case ParsedPath::Sel::Filter:
            for (const auto& r : records) {
                if (stringify(r.value(p.filter_field, nlohmann::json())) == p.filter_value)
                    selected.push_back(r);
            }
            break;
    }
    if (p.field.empty()) return selected;
    std::vector<nlohmann::json> values;
    for (const auto& r : selected)
        if (r.contains(p.field)) values.push_back(r.at(p.field));
    return values;
}

}  // namespace

bool checkpoint_satisfied(const EnvState& s, const Checkpoint& cp) {
    const auto* schemas = s.device ? s.device->schemas_for(cp.app) : nullptr;
    if (!schemas) throw SchemaMismatchError("checkpoint references unknown app " + cp.app);
    ParsedPath p = parse_path(cp.predicate.path);
    check_against_schema(p, cp.app, *schemas);
    const std::vector<nlohmann::json> values = resolve_values(s, cp.app, p);
    switch (cp.predicate.op) {
        case CheckpointOp::Eq:
            return std::any_of(values.begin(), values.end(),
                               [&](const nlohmann::json& v) { return v == cp.predicate.expected; });
        case CheckpointOp::Contains: {
            if (!cp.predicate.expected.is_string()) return false;
            const std::string& needle = cp.predicate.expected.get_ref<const std::string&>();
            return std::any_of(values.begin(), values.end(), [&](const nlohmann::json& v) {
                return v.is_string() &&
                       v.get_ref<const std::string&>().find(needle) != std::string::npos;
            });
        }
        case CheckpointOp::CountEq:
            return static_cast<long>(values.size()) == cp.predicate.expected.get<long>();
        case CheckpointOp::Ge:
            return std::any_of(values.begin(), values.end(), [&](const nlohmann::json& v) {
                return v.is_number() && v.get<double>() >= cp.predicate.expected.get<double>();
            });
    }
    return false;
}

std::set<std::string> satisfied_leaves(const EnvState& s, const Goal& g) {
    std::set<std::string> satisfied;
    for (const auto& leaf : g.logic.leaf_ids()) {
        bool all = true;
        for (const auto& cp : g.checkpoints) {
            if (cp.subtask_id != leaf) continue;
            if (!checkpoint_satisfied(s, cp)) {
                all = false;
                break;
            }
        }
        if (all) satisfied.insert(leaf);
    }
    return satisfied;
}

int reward(const EnvState& s, const Goal& g, const std::vector<std::string>& completion_order) {
    return evaluate_logic(g.logic, satisfied_leaves(s, g), completion_order) ? 1 : 0;
}

ValidationReport validate_against_device(const CompositionalTask& task,
                                         const DeviceConfig& device) {
    ValidationReport report;
    auto error = [&](const std::string& m) {
        report.findings.push_back({ValidationFinding::Severity::Error, m});
    };
    for (const auto& st : task.subtasks) {
        if (st.environment != "system" && !device.has(st.environment))
            error("subtask " + st.id + " targets unregistered environment " + st.environment);
    }
    for (const auto& cp : task.checkpoints) {
        const auto* schemas = device.schemas_for(cp.app);
        if (!schemas) {
            error("checkpoint on unregistered app " + cp.app);
            continue;
        }
        try {
            ParsedPath p = parse_path(cp.predicate.path);
            check_against_schema(p, cp.app, *schemas);
        } catch (const SchemaMismatchError& e) {
            error(std::string("checkpoint path: ") + e.what());
            continue;
        }
        if (cp.predicate.op == CheckpointOp::Contains && !cp.predicate.expected.is_string())
            error("contains checkpoint expects a string value (path " + cp.predicate.path + ")");
        if (cp.predicate.op == CheckpointOp::CountEq &&
            !cp.predicate.expected.is_number_integer())
            error("count_eq checkpoint expects an integer (path " + cp.predicate.path + ")");
        if (cp.predicate.op == CheckpointOp::Ge && !cp.predicate.expected.is_number())
            error("ge checkpoint expects a number (path " + cp.predicate.path + ")");
    }
    return report;
}

Environment::Environment(DeviceConfigPtr device) : device_(std::move(device)) {
    snapshots_["clean"] = clean_state(device_).to_json_value();
}

EnvState Environment::clean_state(DeviceConfigPtr device) {
    EnvState s;
    s.device = device;
    for (const auto& app : device->apps()) {
        AppRuntime rt;
        rt.screen_stack = {app.home_screen};
        s.apps[app.id] = rt;
        Store store;
        for (const auto& [coll, _] : app.collections) store[coll] = {};
        for (const auto& [coll, records] : app.seed_records) store[coll] = records;
        s.stores[app.id] = store;
    }
    s.stores["system"]["answers"] = {};
    return s;
}

EnvState Environment::reset(const std::string& snapshot_id) const {
    auto it = snapshots_.find(snapshot_id);
    if (it == snapshots_.end()) throw UnknownSnapshotError("unknown snapshot: " + snapshot_id);
    return EnvState::from_json_value(it->second, device_);
}

void Environment::register_snapshot(const std::string& id, const EnvState& s) {
    snapshots_[id] = s.to_json_value();
}

void Environment::load_snapshot_file(const std::string& id, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open snapshot file: " + path);
    nlohmann::json j;
    in >> j;
    snapshots_[id] = j;
}

}  // namespace nexus

#include <doctest.h>

#include <random>

#include "nexus/errors.hpp"
#include "nexus/memory.hpp"
#include "helpers.hpp"

using namespace nexus;

namespace {

ActResult bulky_act(int steps) {
    ActResult act;
    act.completed = true;
    for (int i = 0; i < steps; ++i) {
        act.step_logs.push_back({"considering the screen layout and the remaining work items "
                                 "before choosing what to press next, round " +
                                     std::to_string(i),
                                 Action::tap("btn." + std::to_string(i)), std::nullopt});
    }
    act.stop = StopClaim{true, "done"};
    return act;
}

}  // namespace

TEST_CASE("append assigns contiguous indices from zero") {
    ProcessMemory m;
    CHECK(m.append("first", ToolResult{"ok"}).index == 0);
    CHECK(m.append("second", ThinkResult{"t", false}).index == 1);
    CHECK(m.append("third", ToolResult{"ok"}).index == 2);
    CHECK(m.size() == 3);
    for (size_t i = 0; i < m.size(); ++i) CHECK(m.at(i).index == static_cast<long>(i));
}

TEST_CASE("appended entries read back bit-exact") {
    ProcessMemory m;
    ActResult act = bulky_act(3);
    nlohmann::json original = ResultVariant{act};
    m.append("navigate", act);
    nlohmann::json stored = m.at(0).result;
    CHECK(original.dump() == stored.dump());

    // later operations leave earlier entries untouched
    for (int i = 0; i < 20; ++i) m.append("later " + std::to_string(i), ToolResult{"ok"});
    CHECK(nlohmann::json(m.at(0).result).dump() == original.dump());
    CHECK(m.at(0).instruction == "navigate");
}

TEST_CASE("render_context of empty memory is empty") {
    ProcessMemory m;
    CHECK(render_context(m, 1024).empty());
}

TEST_CASE("think texts are included verbatim") {
    ProcessMemory m;
    m.append("sum the expenses", ThinkResult{"total = 143.50", false});
    const std::string out = render_context(m, 1024);
    CHECK(out.find("total = 143.50") != std::string::npos);
    CHECK(out.find("[0] sum the expenses") == 0);
}

TEST_CASE("budget floor is enforced") {
    ProcessMemory m;
    m.append("x", ToolResult{"ok"});
    CHECK_THROWS_AS(render_context(m, 255), BudgetTooSmallError);
    CHECK_NOTHROW(render_context(m, 256));
}

TEST_CASE("think survives adversarial truncation pressure") {
    ProcessMemory m;
    for (int i = 0; i < 25; ++i) m.append("walk around the app " + std::to_string(i), bulky_act(8));
    m.append("compute the schedule conflict", ThinkResult{"conflict at 3pm on Tuesday", false});
    for (int i = 0; i < 25; ++i) m.append("more walking " + std::to_string(i), bulky_act(8));

    const std::string out = render_context(m, 1024);
    CHECK(out.size() <= 1024);
    CHECK(out.find("conflict at 3pm on Tuesday") != std::string::npos);
}

TEST_CASE("rendering never exceeds its budget") {
    std::mt19937 rng(555);
    for (int trial = 0; trial < 120; ++trial) {
        ProcessMemory m;
        const int entries = static_cast<int>(rng() % 30);
        for (int i = 0; i < entries; ++i) {
            switch (rng() % 3) {
                case 0: m.append("act " + std::to_string(i), bulky_act(1 + rng() % 10)); break;
                case 1:
                    m.append("think " + std::to_string(i),
                             ThinkResult{std::string(rng() % 300, 'q'), rng() % 5 == 0});
                    break;
                default: m.append("tool " + std::to_string(i), ToolResult{"ok"}); break;
            }
        }
        const size_t budget = 256 + rng() % 4096;
        CHECK(render_context(m, budget).size() <= budget);
    }
}

TEST_CASE("act entries summarize to flag, step count and last action") {
    ProcessMemory m;
    ActResult act = bulky_act(4);
    m.append("open the ledger", act);
    // generous budget keeps the full step detail
    std::string full = render_context(m, 1 << 16);
    CHECK(full.find("step 1:") != std::string::npos);
    // a tight budget demotes to the one-line summary
    for (int i = 0; i < 6; ++i) m.append("filler " + std::to_string(i), bulky_act(6));
    std::string tight = render_context(m, 700);
    CHECK(tight.size() <= 700);
    CHECK(tight.find("step 1:") == std::string::npos);
}

TEST_CASE("a single oversized think entry survives as a truncated line") {
    ProcessMemory m;
    m.append("digest the report", ThinkResult{std::string(4000, 'z'), false});
    const std::string out = render_context(m, 256);
    CHECK(out.size() == 256);
    CHECK(out.rfind("[0] digest the report -> think: zzz", 0) == 0);
}

TEST_CASE("blanking think texts removes them from the rendering") {
    ProcessMemory m;
    m.append("extract", ThinkResult{"the secret payload", false});
    RenderOptions opts;
    opts.blank_think_texts = true;
    const std::string blanked = render_context(m, 1024, opts);
    CHECK(blanked.find("the secret payload") == std::string::npos);
    CHECK(blanked.find("[0] extract -> think:") != std::string::npos);
}

TEST_CASE("failed think results carry their marker") {
    ProcessMemory m;
    m.append("analyze", ThinkResult{"analyst returned empty reasoning", true});
    CHECK(render_context(m, 1024).find("[failed]") != std::string::npos);
}

TEST_CASE("memory entries round-trip through json") {
    ProcessMemory m;
    m.append("a", bulky_act(2));
    m.append("b", ThinkResult{"text", true});
    m.append("c", ToolResult{"ok: went home"});
    for (const auto& e : m.entries()) {
        nlohmann::json j = e;
        MemoryEntry back = j.get<MemoryEntry>();
        CHECK(nlohmann::json(back).dump() == j.dump());
    }
}

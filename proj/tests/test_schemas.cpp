// Validates the JSON outputs against the shipped schemas with a small
// recursive checker (type, required, properties, items, enum, minimum,
// additionalProperties, local $ref).
#include <doctest.h>

#include <fstream>

#include <json.hpp>

#include "bpfsb/assembler.hpp"
#include "bpfsb/report.hpp"
#include "bpfsb/rewriter.hpp"

using namespace bpfsb;
using nlohmann::json;

namespace {

json load_schema(const std::string& name) {
    const std::string path = std::string(BPFSB_SCHEMA_DIR) + "/" + name;
    std::ifstream in(path);
    REQUIRE_MESSAGE(in.good(), "missing schema ", path);
    return json::parse(in);
}

bool type_matches(const std::string& type, const json& value) {
    if (type == "object")
        return value.is_object();
    if (type == "array")
        return value.is_array();
    if (type == "string")
        return value.is_string();
    if (type == "integer")
        return value.is_number_integer() || value.is_number_unsigned();
    if (type == "number")
        return value.is_number();
    if (type == "boolean")
        return value.is_boolean();
    return false;
}

void validate(const json& schema, const json& value, const json& root,
              const std::string& where) {
    if (schema.contains("$ref")) {
        const std::string ref = schema.at("$ref").get<std::string>();
        REQUIRE_MESSAGE(ref.starts_with("#/"), "only local refs supported: ", ref);
        const json* target = &root;
        std::istringstream path(ref.substr(2));
        std::string part;
        while (std::getline(path, part, '/'))
            target = &target->at(part);
        validate(*target, value, root, where);
        return;
    }
    if (schema.contains("type"))
        REQUIRE_MESSAGE(type_matches(schema.at("type").get<std::string>(), value), where,
                        ": expected ", schema.at("type").get<std::string>());
    if (schema.contains("enum")) {
        bool found = false;
        for (const json& candidate : schema.at("enum"))
            found = found || candidate == value;
        REQUIRE_MESSAGE(found, where, ": value not in enum");
    }
    if (schema.contains("minimum") && value.is_number())
        REQUIRE_MESSAGE(value.get<double>() >= schema.at("minimum").get<double>(), where,
                        ": below minimum");
    if (value.is_object()) {
        if (schema.contains("required"))
            for (const json& key : schema.at("required"))
                REQUIRE_MESSAGE(value.contains(key.get<std::string>()), where,
                                ": missing required key ", key.get<std::string>());
        const json props =
            schema.contains("properties") ? schema.at("properties") : json::object();
        for (const auto& [key, member] : value.items()) {
            if (props.contains(key)) {
                validate(props.at(key), member, root, where + "." + key);
            } else if (schema.contains("additionalProperties") &&
                       schema.at("additionalProperties") == false) {
                FAIL(where, ": unexpected key ", key);
            }
        }
    }
    if (value.is_array() && schema.contains("items"))
        for (size_t i = 0; i < value.size(); ++i)
            validate(schema.at("items"), value[i], root, where + "[" + std::to_string(i) + "]");
}

void conforms(const std::string& schema_name, const std::string& text) {
    const json schema = load_schema(schema_name);
    validate(schema, json::parse(text), schema, schema_name);
}

} // namespace

TEST_CASE("stats json conforms to its schema") {
    const AddressMasks masks = compute_masks(0x10000, 4096);
    const Program p{parse_asm("ldxdw r0, [r1+0]\ncall 35\nexit\n"), ProgramType::xdp, "s"};
    conforms("stats.schema.json", stats_json(instrument(p, masks).injected));
}

TEST_CASE("run report json conforms to its schema") {
    ExecutionResult returned;
    returned.status = ExecStatus::returned;
    returned.return_value = 42;
    returned.counters.mask_executed = 3;
    returned.breakdown = {1.0, 2.0, 3.0, 6.0};
    conforms("run.schema.json", run_report_json(returned, {}));

    ExecutionResult trapped;
    trapped.status = ExecStatus::trap;
    trapped.trap_reason = TrapReason::CfiViolation;
    trapped.trap_detail = "denied";
    const std::vector<ConfinementEvent> events = {{7, 0xDEAF1234, 0xDEADBA34}};
    conforms("run.schema.json", run_report_json(trapped, events));
}

TEST_CASE("bench report json conforms to its schema") {
    BenchReport report;
    report.program = "sample";
    report.iterations = 2;
    report.raw = {10.0, {9.0, 11.0}};
    report.sandboxed = {20.0, {19.0, 21.0}};
    report.counters.mask_executed = 5;
    report.injected.mask_checks = 5;
    report.injected.original_bytes = 40;
    report.injected.instrumented_bytes = 360;
    report.injected.growth_percent = 800.0;
    report.model = {2.0, 3.0, 4.0};
    report.breakdown = {10.0, 0.0, 4.0, 14.0};
    conforms("bench.schema.json", bench_report_json(report));
}

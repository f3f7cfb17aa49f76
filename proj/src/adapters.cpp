#include "excam/adapters.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "excam/rng.hpp"
#include "excam/util.hpp"

namespace excam::adapters {

namespace {

std::string stratum_value(const GenericRecord& record, const std::string& key) {
    if (key == "region") return record.region.value_or("");
    if (key == "language") return record.language;
    throw AdapterError(AdapterError::Kind::kUnknownKey, "unknown stratify key '" + key + "'");
}

}  // namespace

IngestResult ingest(const SourceSpec& spec) {
    if (!std::filesystem::exists(spec.path)) {
        throw AdapterError(AdapterError::Kind::kFileUnreadable,
                           "source file not found: " + spec.path.string());
    }
    std::vector<std::string> lines;
    try {
        lines = util::read_lines(spec.path);
    } catch (const std::exception& e) {
        throw AdapterError(AdapterError::Kind::kFileUnreadable, e.what());
    }

    IngestResult result;
    std::set<std::string> seen_ids;
    for (size_t i = 0; i < lines.size(); ++i) {
        const std::string& line = lines[i];
        int line_number = static_cast<int>(i) + 1;
        if (util::trim(line).empty()) continue;
        auto j = nlohmann::ordered_json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            result.skipped.push_back({line_number, "not valid JSON"});
            continue;
        }
        // spec-level fields win over anything embedded in the line
        j["source_dataset"] = spec.name;
        j["task_type"] = std::string(to_string(spec.task_type));
        try {
            GenericRecord record = record_from_json(j);
            if (!seen_ids.insert(record.id).second) {
                result.skipped.push_back({line_number, "duplicate record id '" + record.id + "'"});
                continue;
            }
            result.records.push_back(std::move(record));
        } catch (const ParseError& e) {
            result.skipped.push_back({line_number, e.what()});
        }
    }
    if (result.records.empty()) {
        throw AdapterError(AdapterError::Kind::kEmptySource,
                           "no valid records in " + spec.path.string());
    }
    return result;
}

std::vector<GenericRecord> stratify_and_cap(const std::vector<GenericRecord>& records,
                                            const std::string& key, int cap, uint64_t seed) {
    if (cap < 1) throw std::invalid_argument("cap must be >= 1");
    if (records.size() <= static_cast<size_t>(cap)) {
        return records;
    }
    if (key != "none") {
        (void)stratum_value(records.front(), key);  // validates the key
    }

    // group record indices by stratum, preserving input order inside each
    std::map<std::string, std::vector<size_t>> strata;
    for (size_t i = 0; i < records.size(); ++i) {
        std::string value = key == "none" ? "" : stratum_value(records[i], key);
        strata[value].push_back(i);
    }

    rng::SplitMix order_rng(rng::derive_seed(seed, "stratum-order"));
    std::vector<std::string> stratum_names;
    stratum_names.reserve(strata.size());
    for (const auto& [name, _] : strata) stratum_names.push_back(name);
    rng::shuffle(stratum_names, order_rng);

    std::map<std::string, std::vector<size_t>> shuffled;
    for (const auto& name : stratum_names) {
        auto indices = strata[name];
        rng::SplitMix inner(rng::derive_seed(seed, "stratum:" + name));
        rng::shuffle(indices, inner);
        shuffled[name] = std::move(indices);
    }

    // round-robin across strata (in seeded order) until the cap is reached
    std::vector<bool> selected(records.size(), false);
    int taken = 0;
    std::vector<size_t> positions(stratum_names.size(), 0);
    while (taken < cap) {
        bool any = false;
        for (size_t s = 0; s < stratum_names.size() && taken < cap; ++s) {
            auto& pool = shuffled[stratum_names[s]];
            auto& pos = positions[s];
            if (pos < pool.size()) {
                selected[pool[pos]] = true;
                ++pos;
                ++taken;
                any = true;
            }
        }
        if (!any) break;  // all strata exhausted below the cap
    }

    std::vector<GenericRecord> out;
    out.reserve(static_cast<size_t>(taken));
    for (size_t i = 0; i < records.size(); ++i) {
        if (selected[i]) out.push_back(records[i]);
    }
    return out;
}

Sample wrap_positive(const GenericRecord& record, uint64_t ordinal, uint64_t seed,
                     const tpl::TemplateLibrary& library) {
    validate(record);
    Sample sample;
    sample.record_id = record.source_dataset.empty()
                           ? record.id
                           : record.source_dataset + "/" + record.id;
    sample.id = sample.record_id + "#pos";

    uint64_t instr_seed = rng::derive_seed(seed, "slot-instruction");
    uint64_t output_seed = rng::derive_seed(seed, "slot-output");
    const auto& instr_pool = library.pool(record.task_type, tpl::Slot::kInstruction);
    const auto& output_pool = library.pool(record.task_type, tpl::Slot::kOutput);
    sample.provenance.instr_template_id = tpl::pick_template(ordinal, instr_seed, instr_pool);
    sample.provenance.output_template_id = tpl::pick_template(ordinal, output_seed, output_pool);
    sample.provenance.error_mode = ErrorMode::kNone;

    sample.instruction = tpl::render(record, tpl::Slot::kInstruction,
                                     sample.provenance.instr_template_id, library);
    sample.output =
        tpl::render(record, tpl::Slot::kOutput, sample.provenance.output_template_id, library);

    sample.report.errors.clear();
    sample.report.culture_related = true;

    sample.metadata.source_dataset = record.source_dataset;
    sample.metadata.language = record.language;
    sample.metadata.region = record.region;
    sample.metadata.task_type = record.task_type;
    validate(sample);
    return sample;
}

void assign_splits(std::vector<Sample>& samples, const SplitRatios& ratios, uint64_t seed) {
    double sum = ratios.train + ratios.dev + ratios.test;
    if (ratios.train <= 0 || ratios.dev <= 0 || ratios.test <= 0 ||
        std::abs(sum - 1.0) > 1e-9) {
        throw std::invalid_argument("split ratios must be positive and sum to 1");
    }

    // records per source, in first-appearance order
    std::map<std::string, std::vector<std::string>> per_source;
    std::map<std::string, std::set<std::string>> seen;
    for (const auto& s : samples) {
        if (seen[s.metadata.source_dataset].insert(s.record_id).second) {
            per_source[s.metadata.source_dataset].push_back(s.record_id);
        }
    }

    std::map<std::string, Split> assignment;
    for (auto& [source, record_ids] : per_source) {
        rng::SplitMix r(rng::derive_seed(seed, "splits:" + source));
        rng::shuffle(record_ids, r);
        const size_t n = record_ids.size();

        // largest-remainder allocation keeps each split within one record
        const double shares[3] = {ratios.train, ratios.dev, ratios.test};
        size_t counts[3];
        double fractions[3];
        size_t allocated = 0;
        for (int k = 0; k < 3; ++k) {
            double exact = shares[k] * static_cast<double>(n);
            counts[k] = static_cast<size_t>(exact);
            fractions[k] = exact - static_cast<double>(counts[k]);
            allocated += counts[k];
        }
        while (allocated < n) {
            int best = 0;
            for (int k = 1; k < 3; ++k) {
                if (fractions[k] > fractions[best]) best = k;
            }
            ++counts[best];
            fractions[best] = -1.0;
            ++allocated;
        }

        size_t pos = 0;
        const Split splits[3] = {Split::kTrain, Split::kDev, Split::kTest};
        for (int k = 0; k < 3; ++k) {
            for (size_t c = 0; c < counts[k]; ++c) {
                assignment[record_ids[pos++]] = splits[k];
            }
        }
    }

    for (auto& s : samples) {
        s.split = assignment.at(s.record_id);
    }
}

}  // namespace excam::adapters

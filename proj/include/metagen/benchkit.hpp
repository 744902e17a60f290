#pragma once

#include <array>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "metagen/core.hpp"
#include "metagen/discretize.hpp"
#include "metagen/errors.hpp"
#include "metagen/homogenize.hpp"

namespace metagen::bench {

using json = nlohmann::ordered_json;
using discretize::VoxelGrid;
using homog::PropertyVector;

// ---------------------------------------------------------------------------
// Task records and JSONL

struct TaskRecord {
    std::string task_type;  // reconstruction | inverse_design | material_understanding
    std::string label;
    std::string source;  // optional; database path starting with "/"
    json data = json::object();
    std::string query;
    std::string response;  // optional
};

inline json record_to_json(const TaskRecord& r) {
    json j;
    j["task_type"] = r.task_type;
    j["label"] = r.label;
    if (!r.source.empty()) j["source"] = r.source;
    j["data"] = r.data;
    j["query"] = r.query;
    if (!r.response.empty()) j["response"] = r.response;
    return j;
}

inline TaskRecord record_from_json(const json& j) {
    TaskRecord r;
    r.task_type = j.at("task_type").get<std::string>();
    r.label = j.at("label").get<std::string>();
    if (j.contains("source")) r.source = j.at("source").get<std::string>();
    if (j.contains("data")) r.data = j.at("data");
    r.query = j.at("query").get<std::string>();
    if (j.contains("response")) r.response = j.at("response").get<std::string>();
    return r;
}

inline void write_jsonl(const std::vector<TaskRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out.good()) fail("IoFailure", "cannot open " + path + " for writing");
    for (const auto& r : records) out << record_to_json(r).dump() << "\n";
    if (!out.good()) fail("IoFailure", "failed while writing " + path);
}

inline std::vector<TaskRecord> read_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) fail("IoFailure", "cannot open " + path);
    std::vector<TaskRecord> records;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            fail("MalformedLine", "line " + std::to_string(lineno) + " of " + path +
                                      " is not valid JSON");
        records.push_back(record_from_json(j));
    }
    return records;
}

// ---------------------------------------------------------------------------
// Splits

struct Splits {
    std::vector<std::string> train, validate, test;
};

/// Seed-deterministic random partition, fixed across all tasks.
inline Splits make_splits(std::vector<std::string> model_ids, uint64_t seed, int test_size = 500,
                          int val_size = 50) {
    if (int(model_ids.size()) <= test_size + val_size)
        fail("TooFewModels", "need more than " + std::to_string(test_size + val_size) +
                                 " models, got " + std::to_string(model_ids.size()));
    Rng rng(seed);
    for (size_t i = model_ids.size(); i > 1; --i)
        std::swap(model_ids[i - 1], model_ids[size_t(rng.below(i))]);
    Splits s;
    s.test.assign(model_ids.begin(), model_ids.begin() + test_size);
    s.validate.assign(model_ids.begin() + test_size, model_ids.begin() + test_size + val_size);
    s.train.assign(model_ids.begin() + test_size + val_size, model_ids.end());
    return s;
}

// ---------------------------------------------------------------------------
// Property metadata

inline const std::vector<std::string>& property_symbols() {
    static const std::vector<std::string> symbols = {
        "E",  "E_1", "E_2", "E_3", "G",  "G_23", "G_13", "G_12", "nu",
        "nu_12", "nu_13", "nu_23", "nu_21", "nu_31", "nu_32", "K", "A", "V"};
    return symbols;
}

inline double property_value(const PropertyVector& p, const std::string& symbol) {
    static const std::map<std::string, double PropertyVector::*> fields = {
        {"E", &PropertyVector::E},     {"E_1", &PropertyVector::E1},
        {"E_2", &PropertyVector::E2},  {"E_3", &PropertyVector::E3},
        {"G", &PropertyVector::G},     {"G_23", &PropertyVector::G23},
        {"G_13", &PropertyVector::G13}, {"G_12", &PropertyVector::G12},
        {"nu", &PropertyVector::nu},   {"nu_12", &PropertyVector::nu12},
        {"nu_13", &PropertyVector::nu13}, {"nu_23", &PropertyVector::nu23},
        {"nu_21", &PropertyVector::nu21}, {"nu_31", &PropertyVector::nu31},
        {"nu_32", &PropertyVector::nu32}, {"K", &PropertyVector::K},
        {"A", &PropertyVector::A},     {"V", &PropertyVector::V},
    };
    auto it = fields.find(symbol);
    if (it == fields.end()) fail("MissingKey", "unknown property symbol " + symbol);
    return p.*(it->second);
}

/// Overall/directional families: a profile may use E or some of E_1..E_3,
/// never both; likewise for G and nu.
inline std::string property_family(const std::string& symbol) {
    if (symbol.rfind("E_", 0) == 0) return "E";
    if (symbol.rfind("G_", 0) == 0) return "G";
    if (symbol.rfind("nu_", 0) == 0) return "nu";
    return symbol;
}

inline bool is_directional(const std::string& symbol) {
    return symbol != property_family(symbol);
}

struct PropertyRange {
    double min = 0, max = 1, q1 = 0.25, q3 = 0.75;
    std::vector<std::pair<double, double>> densely_populated_ranges;
    double width() const { return max - min; }
};

struct PropertyRanges {
    std::map<std::string, PropertyRange> by_symbol;

    const PropertyRange& of(const std::string& symbol) const {
        auto it = by_symbol.find(symbol);
        if (it == by_symbol.end()) fail("MissingKey", "no range for property " + symbol);
        return it->second;
    }

    json to_json() const {
        json j;
        for (const auto& symbol : property_symbols()) {
            auto it = by_symbol.find(symbol);
            if (it == by_symbol.end()) continue;
            const auto& r = it->second;
            json dense = json::array();
            for (auto& [lo, hi] : r.densely_populated_ranges) dense.push_back({lo, hi});
            j[symbol] = {{"min", r.min}, {"max", r.max}, {"q1", r.q1}, {"q3", r.q3},
                         {"densely_populated_ranges", dense}};
        }
        return j;
    }

    static PropertyRanges from_json(const json& j) {
        PropertyRanges out;
        for (auto it = j.begin(); it != j.end(); ++it) {
            PropertyRange r;
            r.min = it.value().at("min").get<double>();
            r.max = it.value().at("max").get<double>();
            r.q1 = it.value().at("q1").get<double>();
            r.q3 = it.value().at("q3").get<double>();
            for (auto& pair : it.value().at("densely_populated_ranges"))
                r.densely_populated_ranges.emplace_back(pair[0].get<double>(), pair[1].get<double>());
            out.by_symbol[it.key()] = r;
        }
        return out;
    }
};

/// Stats pass over a corpus of simulated properties. The nu row is pinned to
/// the reference listing; everything else comes from the corpus quantiles.
inline PropertyRanges compute_ranges(const std::vector<PropertyVector>& corpus) {
    PropertyRanges out;
    for (const auto& symbol : property_symbols()) {
        PropertyRange r;
        if (!corpus.empty()) {
            std::vector<double> values;
            for (const auto& p : corpus) values.push_back(property_value(p, symbol));
            std::sort(values.begin(), values.end());
            auto quantile = [&](double q) {
                double idx = q * double(values.size() - 1);
                size_t lo = size_t(std::floor(idx));
                size_t hi = std::min(values.size() - 1, lo + 1);
                return values[lo] + (values[hi] - values[lo]) * (idx - double(lo));
            };
            r.min = values.front();
            r.max = values.back();
            if (r.max - r.min < 1e-9) r.max = r.min + 1e-9;
            r.q1 = quantile(0.25);
            r.q3 = quantile(0.75);
            r.densely_populated_ranges = {{r.q1, r.q3}};
        }
        out.by_symbol[symbol] = r;
    }
    PropertyRange nu;
    nu.min = -0.5;
    nu.max = 0.5;
    nu.q1 = 0.3;
    nu.q3 = 0.36;
    nu.densely_populated_ranges = {{0.2, 0.4}};
    out.by_symbol["nu"] = nu;
    return out;
}

// ---------------------------------------------------------------------------
// Inverse-design reference dictionary

enum class TargetType { Value, UpperBound, LowerBound, Range };

inline const char* target_type_name(TargetType t) {
    switch (t) {
        case TargetType::Value: return "value";
        case TargetType::UpperBound: return "upper_bound";
        case TargetType::LowerBound: return "lower_bound";
        case TargetType::Range: return "range";
    }
    return "?";
}

struct Descriptor {
    std::string description;
    std::string part_of_speech;  // adjective | noun | verb
    TargetType target_type;
    double target_value = 0;
    double target_hi = 0;  // Range only
};

struct PropertyReference {
    std::string full_name;
    double quantization = 0.01;
    std::vector<Descriptor> descriptors;
};

inline std::map<std::string, PropertyReference> default_reference() {
    std::map<std::string, PropertyReference> ref;
    auto& nu = ref["nu"];
    nu.full_name = "Poisson ratio";
    nu.quantization = 0.01;
    nu.descriptors = {
        {"auxetic", "adjective", TargetType::UpperBound, 0},
        {"a negative Poisson ratio", "noun", TargetType::UpperBound, 0},
        {"a positive Poisson ratio", "noun", TargetType::LowerBound, 0},
        {"contracts transversely under axial compression", "verb", TargetType::UpperBound, 0},
        {"expands transversely under axial compression", "verb", TargetType::LowerBound, 0},
        {"contracts in other directions when compressed along one axis", "verb",
         TargetType::UpperBound, 0},
        {"expands in other directions when compressed along one axis", "verb",
         TargetType::LowerBound, 0},
        {"expands transversely under axial elongation", "verb", TargetType::UpperBound, 0},
        {"contracts transversely under axial elongation", "verb", TargetType::LowerBound, 0},
        {"expands in other directions when stretched along one axis", "verb",
         TargetType::UpperBound, 0},
        {"contracts in other directions when stretched along one axis", "verb",
         TargetType::LowerBound, 0},
    };
    auto& V = ref["V"];
    V.full_name = "volume fraction";
    V.descriptors = {
        {"very dense", "adjective", TargetType::LowerBound, 0.8},
        {"lightweight", "adjective", TargetType::UpperBound, 0.3},
        {"a low relative density", "noun", TargetType::UpperBound, 0.25},
        {"fills most of its bounding cell", "verb", TargetType::LowerBound, 0.8},
    };
    auto& E = ref["E"];
    E.full_name = "Young's modulus";
    E.descriptors = {
        {"stiff", "adjective", TargetType::LowerBound, 0.5},
        {"soft", "adjective", TargetType::UpperBound, 0.05},
        {"carries axial load nearly as well as its base material", "verb", TargetType::LowerBound,
         0.5},
    };
    auto& G = ref["G"];
    G.full_name = "shear modulus";
    G.descriptors = {
        {"shear-resistant", "adjective", TargetType::LowerBound, 0.3},
        {"a low shear stiffness", "noun", TargetType::UpperBound, 0.02},
    };
    auto& K = ref["K"];
    K.full_name = "bulk modulus";
    K.descriptors = {
        {"resists volumetric compression", "verb", TargetType::LowerBound, 0.5},
    };
    auto& A = ref["A"];
    A.full_name = "universal anisotropy index";
    A.descriptors = {
        {"elastically isotropic", "adjective", TargetType::UpperBound, 0.0025},
        {"highly anisotropic", "adjective", TargetType::LowerBound, 0.5},
    };
    for (const auto& symbol : property_symbols())
        if (!ref.count(symbol)) {
            ref[symbol].full_name = symbol;
            ref[symbol].quantization = 0.01;
        }
    return ref;
}

// ---------------------------------------------------------------------------
// Inverse-design target selection

struct Target {
    std::string property;
    TargetType target_type;
    double target_value = 0;
    double target_hi = 0;  // Range only
    std::vector<std::pair<std::string, std::string>> descriptions;  // (text, part_of_speech)
};

struct TargetProfile {
    std::vector<Target> targets;

    json to_json() const {
        json arr = json::array();
        for (const auto& t : targets) {
            json jt;
            jt["property"] = t.property;
            jt["target_type"] = target_type_name(t.target_type);
            if (t.target_type == TargetType::Range)
                jt["target_value"] = {t.target_value, t.target_hi};
            else
                jt["target_value"] = t.target_value;
            json ds = json::array();
            for (auto& [text, pos] : t.descriptions)
                ds.push_back({{"description", text}, {"description_type", pos}});
            jt["target_descriptions"] = ds;
            arr.push_back(jt);
        }
        return arr;
    }

    static TargetProfile from_json(const json& arr) {
        TargetProfile p;
        for (const auto& jt : arr) {
            Target t;
            t.property = jt.at("property").get<std::string>();
            std::string type = jt.at("target_type").get<std::string>();
            t.target_type = type == "value"         ? TargetType::Value
                            : type == "upper_bound" ? TargetType::UpperBound
                            : type == "lower_bound" ? TargetType::LowerBound
                                                    : TargetType::Range;
            if (t.target_type == TargetType::Range) {
                t.target_value = jt.at("target_value")[0].get<double>();
                t.target_hi = jt.at("target_value")[1].get<double>();
            } else {
                t.target_value = jt.at("target_value").get<double>();
            }
            if (jt.contains("target_descriptions"))
                for (const auto& d : jt.at("target_descriptions"))
                    t.descriptions.emplace_back(d.at("description").get<std::string>(),
                                                d.at("description_type").get<std::string>());
            p.targets.push_back(std::move(t));
        }
        return p;
    }
};

constexpr double kIsotropyThreshold = 0.0025;

/// Salience heuristic for picking the "active" properties of a model:
/// near-isotropy rewards A and bars directionals; otherwise directional
/// spreads are rewarded by their pairwise gaps; a high stiffness-to-weight
/// ratio rewards E and V; extremity and rarity add smaller bonuses.
inline std::vector<std::string> select_active_properties(const PropertyVector& props,
                                                         const PropertyRanges& ranges, int n,
                                                         uint64_t seed) {
    n = std::min(n, 6);
    Rng rng(seed);
    const bool isotropic = props.A < kIsotropyThreshold;

    std::map<std::string, double> score;
    for (const auto& symbol : property_symbols()) score[symbol] = 0;

    if (isotropic) score["A"] += 10.0;

    if (!isotropic) {
        const std::map<std::string, std::vector<std::string>> families = {
            {"E", {"E_1", "E_2", "E_3"}},
            {"G", {"G_23", "G_13", "G_12"}},
            {"nu", {"nu_12", "nu_13", "nu_23", "nu_21", "nu_31", "nu_32"}},
        };
        for (const auto& [family, members] : families) {
            double gap = 0;
            for (size_t i = 0; i < members.size(); ++i)
                for (size_t j = i + 1; j < members.size(); ++j)
                    gap = std::max(gap, std::abs(property_value(props, members[i]) -
                                                 property_value(props, members[j])));
            for (const auto& m : members) score[m] += 5.0 * gap / ranges.of(m).width();
        }
    }

    if (props.V > 0 && props.E / props.V > 0.5) {
        score["E"] += 3.0;
        score["V"] += 3.0;
    }

    for (const auto& symbol : property_symbols()) {
        const auto& r = ranges.of(symbol);
        double x = property_value(props, symbol);
        double outside = std::max({0.0, r.q1 - x, x - r.q3});
        score[symbol] += 2.0 * outside / r.width();
        double density = 1.0;
        for (auto& [lo, hi] : r.densely_populated_ranges)
            if (x >= lo && x <= hi) density = 2.0;
        score[symbol] += 1.0 / density;
    }

    auto admissible = [&](const std::string& symbol, const std::vector<std::string>& chosen) {
        if (isotropic && is_directional(symbol)) return false;
        for (const auto& c : chosen) {
            if (c == symbol) return false;
            // overall XOR directional within one family
            if (property_family(c) == property_family(symbol) &&
                is_directional(c) != is_directional(symbol))
                return false;
        }
        return true;
    };

    // rank by score, stable on the canonical symbol order
    std::vector<std::string> ranked = property_symbols();
    std::stable_sort(ranked.begin(), ranked.end(),
                     [&](const std::string& a, const std::string& b) { return score[a] > score[b]; });

    std::vector<std::string> chosen;
    bool random_fill = false;
    for (const auto& symbol : ranked) {
        if (int(chosen.size()) >= n) break;
        if (!admissible(symbol, chosen)) continue;
        chosen.push_back(symbol);
        if (int(chosen.size()) < n && rng.bernoulli(0.10)) {
            random_fill = true;  // break the greedy loop, fill the rest randomly
            break;
        }
    }
    if (random_fill) {
        while (int(chosen.size()) < n) {
            std::vector<std::string> pool;
            for (const auto& symbol : property_symbols())
                if (admissible(symbol, chosen)) pool.push_back(symbol);
            if (pool.empty()) break;
            chosen.push_back(pool[size_t(rng.below(pool.size()))]);
        }
    }
    return chosen;
}

inline bool descriptor_satisfied(const Descriptor& d, double value, double quantization) {
    switch (d.target_type) {
        case TargetType::UpperBound: return value <= d.target_value;
        case TargetType::LowerBound: return value >= d.target_value;
        case TargetType::Value: return std::abs(value - d.target_value) <= quantization;
        case TargetType::Range: return value >= d.target_value && value <= d.target_hi;
    }
    return false;
}

/// For each chosen property pick the satisfied descriptor group offering the
/// tightest bound; fall back to a two-significant-figure value target.
inline TargetProfile select_targets(const PropertyVector& props,
                                    const std::vector<std::string>& chosen,
                                    const std::map<std::string, PropertyReference>& reference,
                                    uint64_t seed) {
    Rng rng(seed);
    TargetProfile profile;
    for (const auto& symbol : chosen) {
        double value = property_value(props, symbol);
        const auto it = reference.find(symbol);
        std::map<std::pair<double, int>, std::vector<const Descriptor*>> groups;
        if (it != reference.end()) {
            for (const auto& d : it->second.descriptors)
                if (descriptor_satisfied(d, value, it->second.quantization))
                    groups[{d.target_value, int(d.target_type)}].push_back(&d);
        }
        if (groups.empty()) {
            Target t;
            t.property = symbol;
            t.target_type = TargetType::Value;
            t.target_value = homog::round_2sf(value);
            std::string name = it != reference.end() ? it->second.full_name : symbol;
            t.descriptions = {{"a " + name + " of about " + format_double(t.target_value, 6),
                               "noun"}};
            profile.targets.push_back(std::move(t));
            continue;
        }
        // tightest bound: minimal |value - target_value|; ties broken at random
        double best = 1e300;
        for (auto& [key, list] : groups) best = std::min(best, std::abs(value - key.first));
        std::vector<std::pair<double, int>> tied;
        for (auto& [key, list] : groups)
            if (std::abs(std::abs(value - key.first) - best) < 1e-12) tied.push_back(key);
        auto key = tied[size_t(rng.below(tied.size()))];

        Target t;
        t.property = symbol;
        t.target_type = TargetType(key.second);
        t.target_value = key.first;
        for (const Descriptor* d : groups[key]) {
            t.descriptions.emplace_back(d->description, d->part_of_speech);
            if (d->target_type == TargetType::Range) t.target_hi = d->target_hi;
        }
        profile.targets.push_back(std::move(t));
    }
    return profile;
}

// ---------------------------------------------------------------------------
// Query rendering

namespace detail {

inline std::string join_list(const std::vector<std::string>& items) {
    if (items.empty()) return "";
    if (items.size() == 1) return items[0];
    if (items.size() == 2) return items[0] + " and " + items[1];
    std::string out;
    for (size_t i = 0; i + 1 < items.size(); ++i) out += items[i] + ", ";
    out += "and " + items.back();
    return out;
}

inline std::string numeric_aside(const Target& t) {
    switch (t.target_type) {
        case TargetType::UpperBound:
            return "(" + t.property + " < " + format_double(t.target_value, 6) + ")";
        case TargetType::LowerBound:
            return "(" + t.property + " > " + format_double(t.target_value, 6) + ")";
        case TargetType::Value:
            return "(" + t.property + " ~ " + format_double(t.target_value, 6) + ")";
        case TargetType::Range:
            return "(" + format_double(t.target_value, 6) + " < " + t.property + " < " +
                   format_double(t.target_hi, 6) + ")";
    }
    return "";
}

inline bool has_digits(const std::string& s) {
    return std::any_of(s.begin(), s.end(),
                       [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

}  // namespace detail

/// Render the natural-language inverse-design request: one sampled phrase
/// per target, binned by part of speech; adjectives split between front and
/// back positions; non-numeric phrases carry a parenthetical numeric aside.
inline std::string render_inverse_query(const TargetProfile& profile, uint64_t seed) {
    if (profile.targets.empty()) fail("Empty", "cannot render an empty target profile");
    Rng rng(seed);

    std::vector<std::string> front_adjectives, back_adjectives, verbs, nouns;
    for (const auto& t : profile.targets) {
        const auto& d = t.descriptions[size_t(rng.below(t.descriptions.size()))];
        std::string phrase = d.first;
        if (!detail::has_digits(phrase)) phrase += " " + detail::numeric_aside(t);
        if (d.second == "adjective") {
            (rng.bernoulli(0.5) ? front_adjectives : back_adjectives).push_back(phrase);
        } else if (d.second == "verb") {
            verbs.push_back(phrase);
        } else {
            nouns.push_back(phrase);
        }
    }
    auto shuffle = [&](std::vector<std::string>& bin) {
        for (size_t i = bin.size(); i > 1; --i) std::swap(bin[i - 1], bin[size_t(rng.below(i))]);
    };
    shuffle(front_adjectives);
    shuffle(back_adjectives);
    shuffle(verbs);
    shuffle(nouns);

    std::string article = "a";
    if (!front_adjectives.empty()) {
        char first = char(std::tolower(static_cast<unsigned char>(front_adjectives[0][0])));
        if (first == 'a' || first == 'e' || first == 'i' || first == 'o' || first == 'u')
            article = "an";
    }

    std::string out = "Write a metagen program that creates " + article + " ";
    if (!front_adjectives.empty()) out += detail::join_list(front_adjectives) + " ";
    out += "material";
    if (!back_adjectives.empty()) out += " that is " + detail::join_list(back_adjectives);
    if (!verbs.empty()) out += " that " + detail::join_list(verbs);
    if (!nouns.empty()) out += " with " + detail::join_list(nouns);
    out += ".";
    return out;
}

/// The universal system prompt shared by every benchmark example. The DSL
/// reference text is inserted by the caller; it is not part of the task
/// records themselves.
inline std::string system_prompt(const std::string& api_description) {
    return "You are an expert metamaterials assistant that generates and analyzes cellular "
           "metamaterial designs based on material properties, images, and programatic "
           "definitions in the Metagen metamaterial DSL.\n\n\n"
           "# Procedural Description in a Metamaterial DSL:\n\n" +
           api_description +
           "\n\n# Material Analysis:\n"
           "You can analyze the density, anisotropy, and elasticity properties of metamaterials. "
           "All metamaterials are assumed to be constucted from an isotropic base material with "
           "Poisson's ratio nu = 0.45.\n"
           "The Young's Modulus of this base material is not specified, instead, the elastic "
           "moduli of the metamaterials -- Young's Modulus (E), Bulk Modulus (K), and Shear "
           "Modulus (G), are expressed relative to the base material Young's modulus (E_base). "
           "This means, for example, that relative Young's Moduli can range from 0 to 1. The "
           "material properties you can analyze are:\n\n"
           "- E: Young's Modulus, Voigt-Reuss-Hill (VRH) average, relative to E_base\n"
           "- E_1,E_2,E_3: Directional Young's Moduli, relative to E_base\n"
           "- G: Shear Modulus (VRH average), relative to E_base\n"
           "- G_23,G_13,G_12: Directional Shear Moduli, relative to E_base\n"
           "- nu: Poisson ratio (VRH average)\n"
           "- nu_12, nu_13, nu_23, nu_21, nu_31, nu_32: Directional Poisson ratios\n"
           "- K: Bulk modulus (VRH average), relative to E_base\n"
           "- A: Anisotropy (universal anisotropy index)\n"
           "- V: Volume Fraction\n\n"
           "# Material Images:\n\n"
           "Images of metamaterials depict a base cell of the material rendered from four "
           "viewpoints:\n\n"
           "- from the top\n- from the front side\n- from the right side\n"
           "- from an angle at the upper-front-right\n\n"
           "# Tasks:\n\n"
           "You will be asked to perform several kinds of tasks:\n\n"
           "- Reconstruction: from one or more images of a target material, reconstruct a Metagen "
           "program that generates the metamaterial in the images.\n"
           "- Inverse Design: from a description of the properties of a desired materials, write "
           "a Metagen program that creates a metamaterial with those properties.\n"
           "- Material Understanding: from images of a metamaterial and/or a Metagen program, "
           "analyze a material and predict its properties.";
}

// ---------------------------------------------------------------------------
// Task builders

/// Everything the builders need to know about one database model.
struct ModelArtifacts {
    std::string id;
    std::string source;  // database path of the program, "/models/<id>/model.py"
    std::array<std::string, 4> renders;  // top, front, right, angled (database paths)
    std::string voxel_ref;               // database path of the geometry
    std::string code;                    // header-stripped program body
    PropertyVector props;
};

namespace detail {

inline const std::array<const char*, 4>& view_labels() {
    static const std::array<const char*, 4> labels = {"Top", "Front", "Right",
                                                      "Angled (Front-Top-Right)"};
    return labels;
}
inline const std::array<const char*, 4>& view_keys() {
    static const std::array<const char*, 4> keys = {"top", "front", "right", "angled"};
    return keys;
}

inline std::string program_block() {
    return "# Output Format:\nGenerate a Metagen program within a python code block:\n\n```python\n"
           "from metagen import *\n\ndef make_structure(...) -> Structure:\n    ...\n```\n";
}

inline json rounded_properties(const PropertyVector& p) {
    json j;
    j["A"] = homog::round_2sf(p.A);
    j["E"] = homog::round_2sf(p.E);
    j["K"] = homog::round_2sf(p.K);
    j["G"] = homog::round_2sf(p.G);
    j["nu"] = homog::round_2sf(p.nu);
    j["V"] = homog::round_2sf(p.V);
    return j;
}

inline std::string properties_response(const PropertyVector& p) {
    return "```json\n" + rounded_properties(p).dump() + "\n```";
}

inline std::string understanding_output_block() {
    return "# Output Format:\n\nOutput a json object, delimited by ```json ```, where the keys are "
           "material property names, and the values are the predicted material properties. Predict "
           "these properties (keys):\n- \"A\" : Anisotropy (universal anisotropy index)\n"
           "- \"E\" : Young's Modulus relative to E_base\n- \"K\" : Bulk modulus relative to "
           "E_base\n- \"G\": Shear modulus relative to E_base\n- \"nu\": Isotropic Poisson ratio\n"
           "- \"V\" : Relative Density (Volume Fraction)\n";
}

}  // namespace detail

/// One record per n-view combination; each model contributes C(4,n) examples.
inline std::vector<TaskRecord> build_reconstruction_tasks(const ModelArtifacts& model, int n) {
    if (n < 1 || n > 4) fail("MissingRenders", "n must be in 1..4");
    for (const auto& r : model.renders)
        if (r.empty()) fail("MissingRenders", "model " + model.id + " lacks a render");

    std::vector<TaskRecord> records;
    for (int mask = 1; mask < 16; ++mask) {
        if (__builtin_popcount(unsigned(mask)) != n) continue;
        TaskRecord rec;
        rec.task_type = "reconstruction";
        rec.source = model.source;
        std::string suffix;
        std::string views_block;
        json images;
        for (int v = 0; v < 4; ++v) {
            if (!(mask & (1 << v))) continue;
            suffix += std::string("_") + detail::view_keys()[v];
            views_block += std::string(detail::view_labels()[v]) + ": <[" + model.renders[v] + "]>\n";
            images[detail::view_keys()[v]] = model.renders[v];
        }
        rec.label = model.id + "_reconstruction" + suffix;
        rec.data["images"] = images;
        rec.data["voxel_grid"] = model.voxel_ref;
        rec.query = "# Task:\nAnalyze these views of a metamaterial, then generate a metamaterial "
                    "DSL procedure to reproduce it.\n\n# Inputs:\n**Rendered Views:**\n" +
                    views_block + "\n" + detail::program_block();
        rec.response = "```python\n" + model.code + "\n```";
        records.push_back(std::move(rec));
    }
    return records;
}

/// single_image and multiview_and_code, with the six global properties
/// rounded to two significant figures as the ground-truth response.
inline std::vector<TaskRecord> build_understanding_tasks(const ModelArtifacts& model) {
    for (const auto& r : model.renders)
        if (r.empty()) fail("MissingRenders", "model " + model.id + " lacks a render");
    if (model.code.empty()) fail("MissingProperties", "model " + model.id + " lacks code");

    std::vector<TaskRecord> records;
    {
        TaskRecord rec;
        rec.task_type = "material_understanding";
        rec.label = model.id + "_understanding_single_image";
        rec.source = model.source;
        rec.data["images"] = {{"angled", model.renders[3]}};
        rec.data["properties"] = detail::rounded_properties(model.props);
        rec.query = "# Task:\nAnalyze these views of a metamaterial, and predict its material "
                    "properties.\n\n# Inputs:\n\n**Rendered View:**\n\n- Angled (Front-Top-Right): "
                    "<[" + model.renders[3] + "]>\n\n" + detail::understanding_output_block();
        rec.response = detail::properties_response(model.props);
        records.push_back(std::move(rec));
    }
    {
        TaskRecord rec;
        rec.task_type = "material_understanding";
        rec.label = model.id + "_understanding_multiview_and_code";
        rec.source = model.source;
        json images;
        for (int v = 0; v < 4; ++v) images[detail::view_keys()[v]] = model.renders[v];
        rec.data["images"] = images;
        rec.data["code"] = model.code;
        rec.data["properties"] = detail::rounded_properties(model.props);
        rec.query =
            "# Task:\nAnalyze these views of a metamaterial, and the Metagen program, and predict "
            "its material properties.\n\n# Inputs:\n\n**Metagen Program:**\n\n" + model.code +
            "\n\n**Rendered Views:**\n- Top: <[" + model.renders[0] + "]>\n- Front: <[" +
            model.renders[1] + "]>\n- Right: <[" + model.renders[2] +
            "]>\n- Angled (Front-Top-Right): <[" + model.renders[3] + "]>\n\n" +
            detail::understanding_output_block();
        rec.response = detail::properties_response(model.props);
        records.push_back(std::move(rec));
    }
    return records;
}

/// Six inverse-design records per model, one per target count.
inline std::vector<TaskRecord> build_inverse_tasks(const ModelArtifacts& model,
                                                   const PropertyRanges& ranges,
                                                   const std::map<std::string, PropertyReference>& reference,
                                                   uint64_t seed) {
    std::vector<TaskRecord> records;
    for (int n = 1; n <= 6; ++n) {
        Rng derived = Rng(seed).derive(uint64_t(n));
        auto chosen = select_active_properties(model.props, ranges, n, derived.next_u64());
        auto profile = select_targets(model.props, chosen, reference, derived.next_u64());
        TaskRecord rec;
        rec.task_type = "inverse_design";
        rec.label = model.id + "_inverse_design_" + std::to_string(n) + "targets";
        rec.source = model.source;
        rec.data["targets"] = profile.to_json();
        rec.query = "# Task:\n" + render_inverse_query(profile, derived.next_u64()) + "\n\n" +
                    detail::program_block();
        rec.response = "```python\n" + model.code + "\n```";
        records.push_back(std::move(rec));
    }
    return records;
}

// ---------------------------------------------------------------------------
// Metrics

namespace detail {

/// Felzenszwalb-Huttenlocher 1D squared distance transform.
inline void dt_1d(std::vector<double>& f) {
    const int n = int(f.size());
    const size_t nsz = f.size();
    std::vector<int> v(nsz);
    std::vector<double> z(nsz + 1), d(nsz);
    int k = 0;
    v[0] = 0;
    z[0] = -1e30;
    z[1] = 1e30;
    for (int q = 1; q < n; ++q) {
        double s;
        for (;;) {
            s = ((f[size_t(q)] + q * q) - (f[size_t(v[size_t(k)])] + v[size_t(k)] * v[size_t(k)])) /
                (2.0 * q - 2.0 * v[size_t(k)]);
            if (s <= z[size_t(k)]) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        v[size_t(k)] = q;
        z[size_t(k)] = s;
        z[size_t(k) + 1] = 1e30;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[size_t(k) + 1] < q) ++k;
        int vk = v[size_t(k)];
        d[size_t(q)] = (q - vk) * (q - vk) + f[size_t(vk)];
    }
    f = d;
}

/// Exact Euclidean squared distance (in voxel units) to the occupied set.
inline std::vector<double> distance_transform(const VoxelGrid& g) {
    const int R = g.resolution;
    std::vector<double> d(size_t(R) * R * R);
    auto id = [R](int i, int j, int k) { return size_t((i * R + j) * R + k); };
    for (int i = 0; i < R; ++i)
        for (int j = 0; j < R; ++j)
            for (int k = 0; k < R; ++k) d[id(i, j, k)] = g.at(i, j, k) ? 0.0 : 1e30;

    std::vector<double> row;
    for (int j = 0; j < R; ++j)
        for (int k = 0; k < R; ++k) {
            row.resize(size_t(R));
            for (int i = 0; i < R; ++i) row[size_t(i)] = d[id(i, j, k)];
            dt_1d(row);
            for (int i = 0; i < R; ++i) d[id(i, j, k)] = row[size_t(i)];
        }
    for (int i = 0; i < R; ++i)
        for (int k = 0; k < R; ++k) {
            row.resize(size_t(R));
            for (int j = 0; j < R; ++j) row[size_t(j)] = d[id(i, j, k)];
            dt_1d(row);
            for (int j = 0; j < R; ++j) d[id(i, j, k)] = row[size_t(j)];
        }
    for (int i = 0; i < R; ++i)
        for (int j = 0; j < R; ++j) {
            row.resize(size_t(R));
            for (int k = 0; k < R; ++k) row[size_t(k)] = d[id(i, j, k)];
            dt_1d(row);
            for (int k = 0; k < R; ++k) d[id(i, j, k)] = row[size_t(k)];
        }
    return d;
}

}  // namespace detail

struct ReconstructionScore {
    double iou = 0;
    double chamfer = 0;
};

/// IoU over occupied voxels plus symmetric mean nearest-center distance in
/// unit-cell lengths, via exact distance transforms.
inline ReconstructionScore eval_reconstruction(const VoxelGrid& pred, const VoxelGrid& truth) {
    if (pred.resolution != truth.resolution)
        fail("ResolutionRange", "prediction and truth resolutions differ");
    const int R = pred.resolution;
    long inter = 0, uni = 0, na = 0, nb = 0;
    for (size_t i = 0; i < pred.occupancy.size(); ++i) {
        bool a = pred.occupancy[i], b = truth.occupancy[i];
        inter += a && b;
        uni += a || b;
        na += a;
        nb += b;
    }
    if (uni == 0) fail("BothEmpty", "IoU is undefined for two empty grids");

    ReconstructionScore score;
    score.iou = double(inter) / double(uni);
    if (na == 0 || nb == 0) {
        score.chamfer = std::numeric_limits<double>::infinity();
        return score;
    }
    auto d_to_truth = detail::distance_transform(truth);
    auto d_to_pred = detail::distance_transform(pred);
    double sum_a = 0, sum_b = 0;
    for (size_t i = 0; i < pred.occupancy.size(); ++i) {
        if (pred.occupancy[i]) sum_a += std::sqrt(d_to_truth[i]);
        if (truth.occupancy[i]) sum_b += std::sqrt(d_to_pred[i]);
    }
    score.chamfer = 0.5 * (sum_a / double(na) + sum_b / double(nb)) / double(R);
    return score;
}

/// Averaged normalized error over the six global properties.
inline double eval_understanding(const std::map<std::string, double>& pred,
                                 const std::map<std::string, double>& truth,
                                 const PropertyRanges& ranges) {
    static const std::array<const char*, 6> keys = {"A", "E", "K", "G", "nu", "V"};
    double sum = 0;
    for (const char* key : keys) {
        auto pit = pred.find(key);
        if (pit == pred.end()) fail("MissingKey", std::string("prediction lacks key ") + key);
        auto tit = truth.find(key);
        if (tit == truth.end()) fail("MissingKey", std::string("truth lacks key ") + key);
        sum += std::abs(pit->second - tit->second) / ranges.of(key).width();
    }
    return sum / double(keys.size());
}

/// Clipped averaged normalized error against the profile: value targets use
/// the normalized absolute error, bounds contribute only their overshoot.
inline double eval_inverse(const TargetProfile& profile, const PropertyVector& simulated,
                           const PropertyRanges& ranges) {
    if (profile.targets.empty()) return 0.0;
    double sum = 0;
    for (const auto& t : profile.targets) {
        double value = property_value(simulated, t.property);
        double width = ranges.of(t.property).width();
        double err = 0;
        switch (t.target_type) {
            case TargetType::Value:
                // Value targets live at the two-significant-figure precision
                // every property is reported at, so compare there; this also
                // keeps profiles exactly satisfied by their source material.
                err = std::abs(homog::round_2sf(value) - t.target_value) / width;
                break;
            case TargetType::UpperBound:
                err = value <= t.target_value ? 0.0 : (value - t.target_value) / width;
                break;
            case TargetType::LowerBound:
                err = value >= t.target_value ? 0.0 : (t.target_value - value) / width;
                break;
            case TargetType::Range:
                if (value < t.target_value)
                    err = (t.target_value - value) / width;
                else if (value > t.target_hi)
                    err = (value - t.target_hi) / width;
                break;
        }
        sum += err;
    }
    return std::clamp(sum / double(profile.targets.size()), 0.0, 1.0);
}

}  // namespace metagen::bench

#include "erd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_map>

#include "erd/errors.hpp"

namespace erd {

using nlohmann::json;

const char* to_string(Outcome outcome) noexcept {
    switch (outcome) {
        case Outcome::TP: return "TP";
        case Outcome::FP: return "FP";
        case Outcome::FN: return "FN";
        case Outcome::TN: return "TN";
    }
    return "TN";
}

Outcome outcome_from_string(std::string_view text) {
    if (text == "TP") return Outcome::TP;
    if (text == "FP") return Outcome::FP;
    if (text == "FN") return Outcome::FN;
    if (text == "TN") return Outcome::TN;
    throw ValidationError("unknown outcome '" + std::string(text) + "'");
}

void MetricsConfig::validate() const {
    if (theta < 1) throw ValidationError("theta must be >= 1");
    if ((c_fp && *c_fp < 0) || c_fn < 0 || c_tp < 0) throw ValidationError("costs must be >= 0");
    if (!(f_latency_p > 0)) throw ValidationError("f_latency_p must be > 0");
    for (int t : report_thetas) {
        if (t < 1) throw ValidationError("report thetas must be >= 1");
    }
}

void to_json(json& j, const MetricsConfig& c) {
    j = json{{"theta", c.theta},
             {"c_fn", c.c_fn},
             {"c_tp", c.c_tp},
             {"f_latency_p", c.f_latency_p},
             {"report_thetas", c.report_thetas}};
    j["c_fp"] = c.c_fp ? json(*c.c_fp) : json(nullptr);
}

void from_json(const json& j, MetricsConfig& c) {
    MetricsConfig d;
    c.theta = j.value("theta", d.theta);
    c.c_fp = j.contains("c_fp") && !j.at("c_fp").is_null()
                 ? std::optional<double>(j.at("c_fp").get<double>())
                 : std::nullopt;
    c.c_fn = j.value("c_fn", d.c_fn);
    c.c_tp = j.value("c_tp", d.c_tp);
    c.f_latency_p = j.value("f_latency_p", d.f_latency_p);
    c.report_thetas = j.value("report_thetas", d.report_thetas);
    c.validate();
}

namespace {

double erde_at(const std::map<int, double>& erde, int theta) {
    const auto it = erde.find(theta);
    return it == erde.end() ? std::nan("") : it->second;
}

// Pairs each gold user with its decision, in gold order.
std::vector<const Decision*> align(std::span<const Decision> decisions, const Corpus& gold) {
    std::unordered_map<std::string_view, std::size_t> slot;
    slot.reserve(gold.users.size());
    for (std::size_t i = 0; i < gold.users.size(); ++i) slot.emplace(gold.users[i].user_id, i);

    std::vector<const Decision*> aligned(gold.users.size(), nullptr);
    for (const auto& d : decisions) {
        const auto it = slot.find(d.user_id);
        if (it == slot.end()) throw ContractViolation("decision for unknown user '" + d.user_id + "'");
        if (aligned[it->second]) throw ContractViolation("duplicate decision for '" + d.user_id + "'");
        if (d.k < 1) throw ContractViolation("decision k must be >= 1 for '" + d.user_id + "'");
        aligned[it->second] = &d;
    }
    for (std::size_t i = 0; i < aligned.size(); ++i) {
        if (!aligned[i]) {
            throw ContractViolation("missing decision for '" + gold.users[i].user_id + "'");
        }
    }
    return aligned;
}

double ratio(double num, double den) { return den > 0 ? num / den : 0.0; }

double speed_penalty(int k, double p) { return -1.0 + 2.0 / (1.0 + std::exp(-p * (k - 1))); }

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ClassificationMetrics from_counts(const OutcomeCounts& c) {
    ClassificationMetrics m;
    m.precision = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp));
    m.recall = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn));
    m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    m.accuracy = ratio(static_cast<double>(c.tp + c.tn), static_cast<double>(c.total()));
    return m;
}

}  // namespace

Outcome classify_outcome(const Decision& decision, const UserHistory& gold) {
    if (decision.user_id != gold.user_id) {
        throw ContractViolation("decision user '" + decision.user_id + "' does not match gold '" +
                                gold.user_id + "'");
    }
    const bool said_positive = decision.verdict == Label::positive;
    if (gold.positive()) return said_positive ? Outcome::TP : Outcome::FN;
    return said_positive ? Outcome::FP : Outcome::TN;
}

double latency_cost(int k, int theta) {
    // sigmoid(k - theta), algebraically identical to 1 - 1/(1 + e^(k - theta))
    return 1.0 / (1.0 + std::exp(static_cast<double>(theta) - static_cast<double>(k)));
}

OutcomeCounts count_outcomes(std::span<const Decision> decisions, const Corpus& gold) {
    const auto aligned = align(decisions, gold);
    OutcomeCounts c;
    for (std::size_t i = 0; i < aligned.size(); ++i) {
        switch (classify_outcome(*aligned[i], gold.users[i])) {
            case Outcome::TP: ++c.tp; break;
            case Outcome::FP: ++c.fp; break;
            case Outcome::FN: ++c.fn; break;
            case Outcome::TN: ++c.tn; break;
        }
    }
    return c;
}

double erde(std::span<const Decision> decisions, const Corpus& gold, const MetricsConfig& config) {
    config.validate();
    const auto aligned = align(decisions, gold);
    const double c_fp = config.resolved_c_fp(gold);
    double sum = 0.0;
    for (std::size_t i = 0; i < aligned.size(); ++i) {
        switch (classify_outcome(*aligned[i], gold.users[i])) {
            case Outcome::FP: sum += c_fp; break;
            case Outcome::FN: sum += config.c_fn; break;
            case Outcome::TP: sum += latency_cost(aligned[i]->k, config.theta) * config.c_tp; break;
            case Outcome::TN: break;
        }
    }
    return sum / static_cast<double>(aligned.size());
}

ClassificationMetrics classification_metrics(std::span<const Decision> decisions,
                                             const Corpus& gold) {
    return from_counts(count_outcomes(decisions, gold));
}

double f_latency(std::span<const Decision> decisions, const Corpus& gold,
                 const MetricsConfig& config) {
    const auto aligned = align(decisions, gold);
    std::vector<double> penalties;
    OutcomeCounts c;
    for (std::size_t i = 0; i < aligned.size(); ++i) {
        switch (classify_outcome(*aligned[i], gold.users[i])) {
            case Outcome::TP:
                ++c.tp;
                penalties.push_back(speed_penalty(aligned[i]->k, config.f_latency_p));
                break;
            case Outcome::FP: ++c.fp; break;
            case Outcome::FN: ++c.fn; break;
            case Outcome::TN: ++c.tn; break;
        }
    }
    if (penalties.empty()) return 0.0;
    return from_counts(c).f1 * (1.0 - median(std::move(penalties)));
}

MetricsReport compute_report(std::span<const Decision> decisions, const Corpus& gold,
                             const MetricsConfig& config) {
    config.validate();
    MetricsReport r;
    r.counts = count_outcomes(decisions, gold);
    const auto m = from_counts(r.counts);
    r.precision = m.precision;
    r.recall = m.recall;
    r.f1 = m.f1;
    r.accuracy = m.accuracy;
    auto thetas = config.report_thetas;
    thetas.push_back(config.theta);
    for (int t : thetas) r.erde[t] = erde(decisions, gold, config.with_theta(t));
    r.f_latency = f_latency(decisions, gold, config);

    const auto aligned = align(decisions, gold);
    std::vector<double> delays;
    for (std::size_t i = 0; i < aligned.size(); ++i) {
        if (classify_outcome(*aligned[i], gold.users[i]) == Outcome::TP) {
            delays.push_back(aligned[i]->k);
        }
    }
    if (!delays.empty()) r.median_tp_delay = median(std::move(delays));
    return r;
}

void to_json(json& j, const MetricsReport& r) {
    j = json::object();
    j["P"] = r.precision;
    j["R"] = r.recall;
    j["F1"] = r.f1;
    j["acc"] = r.accuracy;
    j["ERDE5"] = r.erde.count(5) ? json(r.erde.at(5)) : json(nullptr);
    j["ERDE30"] = r.erde.count(30) ? json(r.erde.at(30)) : json(nullptr);
    j["F-latency"] = r.f_latency;
    j["TP"] = r.counts.tp;
    j["FP"] = r.counts.fp;
    j["FN"] = r.counts.fn;
    j["TN"] = r.counts.tn;
    j["median_tp_delay"] = r.median_tp_delay ? json(*r.median_tp_delay) : json(nullptr);
    json erde = json::object();
    for (const auto& [t, v] : r.erde) erde[std::to_string(t)] = v;
    j["erde"] = std::move(erde);
}

void from_json(const json& j, MetricsReport& r) {
    r.precision = j.at("P").get<double>();
    r.recall = j.at("R").get<double>();
    r.f1 = j.at("F1").get<double>();
    r.accuracy = j.at("acc").get<double>();
    r.f_latency = j.at("F-latency").get<double>();
    r.counts.tp = j.at("TP").get<std::size_t>();
    r.counts.fp = j.at("FP").get<std::size_t>();
    r.counts.fn = j.at("FN").get<std::size_t>();
    r.counts.tn = j.at("TN").get<std::size_t>();
    r.median_tp_delay = j.at("median_tp_delay").is_null()
                            ? std::nullopt
                            : std::optional<double>(j.at("median_tp_delay").get<double>());
    r.erde.clear();
    for (const auto& [key, value] : j.at("erde").items()) r.erde[std::stoi(key)] = value.get<double>();
}

std::string report_csv(const MetricsReport& r) {
    std::string out;
    for (std::size_t i = 0; i < std::size(kReportColumns); ++i) {
        if (i) out += ',';
        out += kReportColumns[i];
    }
    out += '\n';
    char buf[512];
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%zu,%zu,%zu,%zu\n",
                  r.precision, r.recall, r.f1, r.accuracy, erde_at(r.erde, 5), erde_at(r.erde, 30),
                  r.f_latency, r.counts.tp, r.counts.fp, r.counts.fn, r.counts.tn);
    out += buf;
    return out;
}

}  // namespace erd

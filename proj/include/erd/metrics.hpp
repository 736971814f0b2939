#pragma once
// Early-risk metrics: latency cost, ERDE, F-latency and the usual
// precision/recall/F1/accuracy on the positive class.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "erd/corpus.hpp"
#include "json.hpp"

namespace erd {

struct Decision {
    std::string user_id;
    Label verdict = Label::negative;
    int k = 1;  // posts read when the final verdict was issued (1-based)
};

enum class Outcome : std::uint8_t { TP, FP, FN, TN };

const char* to_string(Outcome outcome) noexcept;
Outcome outcome_from_string(std::string_view text);
inline bool correct(Outcome o) noexcept { return o == Outcome::TP || o == Outcome::TN; }

struct MetricsConfig {
    int theta = 30;
    std::optional<double> c_fp;  // unset: positive ratio of the gold corpus
    double c_fn = 1.0;
    double c_tp = 1.0;
    double f_latency_p = 0.0078;
    std::vector<int> report_thetas{5, 30};

    double resolved_c_fp(const Corpus& gold) const {
        return c_fp.value_or(gold.positive_ratio());
    }
    MetricsConfig with_theta(int t) const {
        auto c = *this;
        c.theta = t;
        return c;
    }
    void validate() const;
};

void to_json(nlohmann::json& j, const MetricsConfig& c);
void from_json(const nlohmann::json& j, MetricsConfig& c);

struct OutcomeCounts {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    std::size_t total() const noexcept { return tp + fp + fn + tn; }
    bool operator==(const OutcomeCounts&) const = default;
};

struct ClassificationMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double accuracy = 0.0;
};

struct MetricsReport {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double accuracy = 0.0;
    std::map<int, double> erde;  // theta -> ERDE_theta
    double f_latency = 0.0;
    OutcomeCounts counts;
    std::optional<double> median_tp_delay;

    bool operator==(const MetricsReport&) const = default;
};

// Flat columns shared by the CSV row and the JSON report.
inline constexpr const char* kReportColumns[] = {"P",     "R",      "F1",        "acc",
                                                 "ERDE5", "ERDE30", "F-latency", "TP",
                                                 "FP",    "FN",     "TN"};

void to_json(nlohmann::json& j, const MetricsReport& r);
void from_json(const nlohmann::json& j, MetricsReport& r);
std::string report_csv(const MetricsReport& r);  // header + one row

Outcome classify_outcome(const Decision& decision, const UserHistory& gold);

// lc_theta(k) = 1 - 1/(1 + e^(k - theta))
double latency_cost(int k, int theta);

// Decisions are matched to gold users by id; exactly one per user is required.
double erde(std::span<const Decision> decisions, const Corpus& gold, const MetricsConfig& config);

// F1 scaled by 1 - median over TPs of (-1 + 2 / (1 + e^(-p (k - 1)))). Zero without TPs.
double f_latency(std::span<const Decision> decisions, const Corpus& gold,
                 const MetricsConfig& config);

ClassificationMetrics classification_metrics(std::span<const Decision> decisions,
                                             const Corpus& gold);

OutcomeCounts count_outcomes(std::span<const Decision> decisions, const Corpus& gold);

MetricsReport compute_report(std::span<const Decision> decisions, const Corpus& gold,
                             const MetricsConfig& config);

}  // namespace erd

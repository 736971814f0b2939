#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "erd/cli.hpp"
#include "erd/corpus.hpp"
#include "erd/errors.hpp"
#include "erd/erdserver.hpp"
#include "erd/metrics.hpp"
#include "erd/trainer.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

std::string generate(const std::string& spec_json) {
    const auto spec = json::parse(spec_json).get<erd::SyntheticSpec>();
    return erd::serialize_corpus(erd::generate_synthetic(spec));
}

std::string stats(const std::string& jsonl) {
    const auto s = erd::corpus_stats(erd::parse_corpus(jsonl, "corpus"));
    return json{{"users", s.users},         {"positives", s.positives}, {"negatives", s.negatives},
                {"mean_posts", s.mean_posts}, {"min_posts", s.min_posts}, {"max_posts", s.max_posts}}
        .dump();
}

std::string score(const std::string& decisions_json, const std::string& gold_jsonl,
                  const std::string& metrics_json) {
    const auto gold = erd::parse_corpus(gold_jsonl, "gold");
    std::vector<erd::Decision> ds;
    for (const auto& d : json::parse(decisions_json)) {
        ds.push_back({d.at("user_id").get<std::string>(), erd::label_from_int(d.at("decision").get<int>()),
                      d.at("k").get<int>()});
    }
    const auto cfg = metrics_json.empty() ? erd::MetricsConfig{}
                                          : json::parse(metrics_json).get<erd::MetricsConfig>();
    return json(erd::compute_report(ds, gold, cfg)).dump();
}

std::pair<double, std::vector<double>> loss_of(const std::vector<double>& probs,
                                                     const std::vector<int>& pred_labels,
                                                     const std::vector<int>& pred_times,
                                                     const std::vector<int>& real_labels,
                                                     const std::vector<int>& real_times, int theta,
                                                     const std::string& mode) {
    std::vector<erd::Label> pl, rl;
    for (int v : pred_labels) pl.push_back(erd::label_from_int(v));
    for (int v : real_labels) rl.push_back(erd::label_from_int(v));
    const auto r = erd::temporal_loss(probs, pl, pred_times, rl, real_times, theta,
                                      erd::loss_mode_from_string(mode));
    return {r.loss, r.per_sample};
}

bool alarm_of(double p, int k, double threshold, int min_delay) {
    erd::PolicyConfig c;
    c.threshold = threshold;
    c.min_delay = min_delay;
    c.validate();
    return erd::policy_decide(p, k, c) == erd::Action::alarm;
}

py::tuple cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int code = 0;
    {
        py::gil_scoped_release release;
        code = erd::run_cli(args, out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Temporal fine-tuning for early risk detection (native core)";

    py::register_exception<erd::Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<erd::ContractViolation>(m, "ContractViolation", PyExc_ValueError);
    py::register_exception<erd::ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<erd::ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<erd::NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    m.def("latency_cost", &erd::latency_cost, py::arg("k"), py::arg("theta"));
    m.def("generate_corpus", &generate, py::arg("spec_json"),
          "Synthetic corpus as JSONL for a JSON-encoded generator spec.");
    m.def("corpus_stats", &stats, py::arg("jsonl"));
    m.def("score", &score, py::arg("decisions_json"), py::arg("gold_jsonl"), py::arg("metrics_json") = "");
    m.def("temporal_loss", &loss_of, py::arg("probs"), py::arg("pred_labels"), py::arg("pred_times"),
          py::arg("real_labels"), py::arg("real_times"), py::arg("theta") = 30,
          py::arg("mode") = "constant_paper");
    m.def("policy_alarm", &alarm_of, py::arg("probability"), py::arg("posts_read"), py::arg("threshold") = 0.7,
          py::arg("min_delay") = 5);
    m.def("encode_timed_input",
          [](const std::string& text, int k) { return erd::encode_timed_input({"", k, text, 0, 0}); },
          py::arg("text"), py::arg("k"));
    m.def("decode_timed_input", [](const std::string& s) { return erd::decode_timed_input(s); });
    m.def("run_cli", &cli, py::arg("args"), "Runs the erd command line; returns (exit_code, stdout, stderr).");
}

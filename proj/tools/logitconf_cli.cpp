// logitconf: confidence maps, calibration reports, estimator comparisons,
// ensemble aggregation, the toy trainer and the timing benchmark, all over
// GLF1 tensors.
//
// Exit codes: 0 success, 2 usage error, 3 I/O error, 4 shape/validation
// error, 5 numerical non-convergence.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "logitconf/bench.hpp"
#include "logitconf/confidence.hpp"
#include "logitconf/ensemble.hpp"
#include "logitconf/gaussian.hpp"
#include "logitconf/metrics.hpp"
#include "logitconf/report_io.hpp"
#include "logitconf/svg.hpp"
#include "logitconf/tensor_io.hpp"
#include "logitconf/toy.hpp"

namespace lc = logitconf;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitShape = 4;
constexpr int kExitNonConvergence = 5;

struct NonConvergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

lc::GaussianField load_field(const std::string& means_path, const std::string& stds_path) {
    const lc::Tensor means = lc::read_tensor(means_path);
    const lc::Tensor stds = lc::read_tensor(stds_path);
    if (means.dtype != lc::Dtype::F32 || stds.dtype != lc::Dtype::F32)
        throw std::invalid_argument("means/stds tensors must be f32");
    if (means.dims.size() != 3 || means.dims != stds.dims)
        throw std::invalid_argument("means/stds must share an (H,W,C) shape");
    std::vector<double> m(means.f32.begin(), means.f32.end());
    std::vector<double> s(stds.f32.begin(), stds.f32.end());
    return lc::GaussianField(means.dims[0], means.dims[1], means.dims[2],
                             std::move(m), std::move(s));
}

void write_maps(const lc::FieldResult& r, const std::string& pred_path,
                const std::string& conf_path, const std::string& unc_path) {
    const std::vector<uint32_t> dims{r.height, r.width};
    lc::write_tensor(pred_path, lc::Tensor::from_u32(dims, r.pred));
    std::vector<float> conf(r.conf.begin(), r.conf.end());
    std::vector<float> unc(r.unc.begin(), r.unc.end());
    lc::write_tensor(conf_path, lc::Tensor::from_f32(dims, std::move(conf)));
    lc::write_tensor(unc_path, lc::Tensor::from_f32(dims, std::move(unc)));
}

// ---------------------------------------------------------------------------
// confidence

struct ConfidenceArgs {
    std::string means, stds, method = "lower-bound";
    uint64_t samples = 1000;
    uint64_t seed = 0;
    uint32_t quad_points = 129;
    unsigned threads = 1;
    bool reuse_pool = false;
    std::string out_pred, out_conf, out_unc;
};

int run_confidence(const ConfidenceArgs& a) {
    lc::EstimatorConfig cfg;
    cfg.method = lc::parse_method(a.method);
    cfg.sample_count = a.samples;
    cfg.seed = a.seed;
    cfg.quadrature_points = a.quad_points;
    cfg.reuse_sample_pool = a.reuse_pool;

    const lc::GaussianField field = load_field(a.means, a.stds);
    const lc::FieldResult r = lc::field_confidence(field, cfg, a.threads);
    write_maps(r, a.out_pred, a.out_conf, a.out_unc);
    if (r.nonconverged > 0) {
        std::cerr << "warning: " << r.nonconverged
                  << " pixel(s) hit the quadrature node cap without converging\n";
        return kExitNonConvergence;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// calibrate

struct CalibrateArgs {
    std::string conf, pred, labels;
    std::optional<uint32_t> ignore;
    uint32_t bins = 10;
    std::string scheme = "equal-width";
    std::string out_json, out_csv, out_svg;
    std::string method_label = "external";
    uint64_t sample_count = 0;
    uint64_t seed = 0;
};

int run_calibrate(const CalibrateArgs& a) {
    const double t0 = now_seconds();
    const lc::Tensor conf_t = lc::read_tensor(a.conf);
    const lc::Tensor pred_t = lc::read_tensor(a.pred);
    const lc::Tensor labels_t = lc::read_tensor(a.labels);
    if (conf_t.dtype != lc::Dtype::F32)
        throw std::invalid_argument("confidence tensor must be f32");
    if (pred_t.dtype != lc::Dtype::U32 || labels_t.dtype != lc::Dtype::U32)
        throw std::invalid_argument("pred/labels tensors must be u32");
    if (conf_t.dims != pred_t.dims || conf_t.dims != labels_t.dims)
        throw std::invalid_argument("conf/pred/labels shapes differ");

    std::vector<double> confidences;
    std::vector<uint8_t> correct;
    uint32_t max_class = 0;
    for (size_t i = 0; i < conf_t.f32.size(); ++i) {
        const uint32_t label = labels_t.u32[i];
        if (a.ignore && label == *a.ignore) continue;
        confidences.push_back(conf_t.f32[i]);
        correct.push_back(pred_t.u32[i] == label ? 1 : 0);
        max_class = std::max({max_class, label, pred_t.u32[i]});
    }
    if (confidences.empty())
        throw std::invalid_argument("no samples left after ignore filtering");

    lc::ReportFile report;
    report.calibration = lc::make_calibration_report(confidences, correct, a.bins,
                                                     lc::parse_scheme(a.scheme));
    report.method = a.method_label;
    report.sample_count = a.sample_count;
    report.seed = a.seed;

    const lc::ConfusionMatrix cm =
        lc::accumulate_confusion(pred_t.u32, labels_t.u32, max_class + 1, a.ignore);
    const lc::IouResult iou = lc::miou(cm);
    report.miou = iou.mean;
    report.per_class_iou = iou.per_class;

    report.wall_time_seconds = now_seconds() - t0;
    lc::write_report(a.out_json, report);
    if (!a.out_csv.empty()) lc::write_csv(a.out_csv, report.calibration.bins);
    if (!a.out_svg.empty()) lc::write_reliability_svg(a.out_svg, report.calibration.bins);
    std::cout << "ace " << report.calibration.ace << "  ece " << report.calibration.ece
              << "  miou " << iou.mean << "  samples " << report.calibration.total_samples
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// compare

struct CompareArgs {
    std::string means, stds;
    uint64_t mc_samples = 10000;
    uint64_t seed = 0;
    uint32_t quad_points = 129;
    std::string out_csv;
};

int run_compare(const CompareArgs& a) {
    const lc::GaussianField field = load_field(a.means, a.stds);
    std::string csv = "pixel,exact,lower_bound,mc,joint,softmax_avg\n";
    char buf[256];
    double gap_sum = 0.0;
    uint64_t nonconverged = 0;
    std::vector<double> probs(field.classes);
    for (uint64_t p = 0; p < field.pixels(); ++p) {
        const auto means = field.means_at(p);
        const auto stds = field.stds_at(p);
        const size_t w = lc::select_winner(means);
        const lc::DeterministicStream stream{a.seed, p};
        lc::QuadratureOptions qopt;
        qopt.initial_points = a.quad_points;
        const lc::QuadratureValue exact = lc::win_prob_quadrature(means, stds, w, qopt);
        if (!exact.converged) ++nonconverged;
        const double lb = lc::confidence_lower_bound(means, stds, w);
        const double mc = lc::confidence_mc(means, stds, w, a.mc_samples, stream);
        const double joint = lc::confidence_joint_sampling(means, stds, w, a.mc_samples, stream);
        lc::softmax_avg_probs(means, stds, a.mc_samples, stream, probs);
        std::snprintf(buf, sizeof(buf), "%llu,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      static_cast<unsigned long long>(p), exact.value, lb, mc, joint,
                      probs[w]);
        csv += buf;
        gap_sum += exact.value - lb;
    }
    const double mean_gap = gap_sum / static_cast<double>(field.pixels());
    std::snprintf(buf, sizeof(buf), "summary,%.17g,,,,\n", mean_gap);
    csv += buf;

    std::ofstream out(a.out_csv, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + a.out_csv);
    out << csv;
    if (!out) throw std::runtime_error("write failed: " + a.out_csv);
    std::cout << "mean (exact - lower_bound) = " << mean_gap << "\n";
    if (nonconverged > 0) {
        std::cerr << "warning: " << nonconverged << " pixel(s) did not converge\n";
        return kExitNonConvergence;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// ensemble

struct EnsembleArgs {
    std::vector<std::string> members; // "means.glf,stds.glf"
    std::string method = "lower-bound";
    uint64_t samples = 1000;
    uint64_t seed = 0;
    uint32_t quad_points = 129;
    unsigned threads = 1;
    std::string out_pred, out_conf, out_unc, out_json;
};

int run_ensemble(const EnsembleArgs& a) {
    const double t0 = now_seconds();
    lc::EnsembleField e;
    for (const std::string& spec : a.members) {
        const size_t comma = spec.find(',');
        if (comma == std::string::npos)
            throw std::invalid_argument("--member expects MEANS,STDS: " + spec);
        e.members.push_back(load_field(spec.substr(0, comma), spec.substr(comma + 1)));
    }
    lc::EstimatorConfig cfg;
    cfg.method = lc::parse_method(a.method);
    cfg.sample_count = a.samples;
    cfg.seed = a.seed;
    cfg.quadrature_points = a.quad_points;

    const lc::FieldResult r = lc::ensemble_confidence(e, cfg, a.threads);
    write_maps(r, a.out_pred, a.out_conf, a.out_unc);
    if (!a.out_json.empty()) {
        json j;
        j["method"] = a.method;
        j["members"] = a.members.size();
        j["height"] = r.height;
        j["width"] = r.width;
        j["sample_count"] = a.samples;
        j["seed"] = a.seed;
        j["nonconverged"] = r.nonconverged;
        j["wall_time_seconds"] = now_seconds() - t0;
        std::ofstream out(a.out_json, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open for writing: " + a.out_json);
        out << j.dump(2) << "\n";
    }
    if (r.nonconverged > 0) return kExitNonConvergence;
    return 0;
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
    uint32_t classes = 20;
    uint64_t pixels = 65536;
    std::string methods = "lower-bound,softmax-avg";
    uint64_t samples = 50;
    uint32_t repeats = 10;
    uint32_t warmup = 2;
    uint64_t seed = 1;
    unsigned threads = 1;
    bool no_reuse_pool = false;
    std::string out_json;
};

int run_bench(const BenchArgs& a) {
    lc::BenchSpec spec;
    spec.classes = a.classes;
    spec.pixels = a.pixels;
    spec.methods.clear();
    std::string rest = a.methods;
    while (!rest.empty()) {
        const size_t comma = rest.find(',');
        spec.methods.push_back(lc::parse_method(rest.substr(0, comma)));
        rest = comma == std::string::npos ? "" : rest.substr(comma + 1);
    }
    spec.sample_count = a.samples;
    spec.repeats = a.repeats;
    spec.warmup = a.warmup;
    spec.seed = a.seed;
    spec.threads = a.threads;
    spec.reuse_sample_pool = !a.no_reuse_pool;

    const std::vector<lc::BenchResult> results = lc::run_bench(spec);

    json j;
    j["classes"] = spec.classes;
    j["pixels"] = spec.pixels;
    j["sample_count"] = spec.sample_count;
    j["repeats"] = spec.repeats;
    j["warmup"] = spec.warmup;
    j["seed"] = spec.seed;
    j["threads"] = spec.threads;
    j["reuse_sample_pool"] = spec.reuse_sample_pool;
    j["reference_method"] = "softmax-avg";
    json arr = json::array();
    for (const auto& r : results) {
        arr.push_back({{"method", r.method},
                       {"classes", r.classes},
                       {"pixels", r.pixels},
                       {"sample_count", r.sample_count},
                       {"repeats", r.repeats},
                       {"warmup", r.warmup},
                       {"times_seconds", r.times_seconds},
                       {"median_seconds", r.median_seconds},
                       {"speedup_vs_reference", r.speedup_vs_reference},
                       {"mean_confidence", r.mean_confidence},
                       {"nonconverged", r.nonconverged}});
    }
    j["results"] = std::move(arr);
    std::ofstream out(a.out_json, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + a.out_json);
    out << j.dump(2) << "\n";

    std::printf("%-16s %12s %10s %16s\n", "method", "median [s]", "speedup", "mean confidence");
    for (const auto& r : results)
        std::printf("%-16s %12.6f %9.2fx %16.6f\n", r.method.c_str(), r.median_seconds,
                    r.speedup_vs_reference, r.mean_confidence);
    return 0;
}

// ---------------------------------------------------------------------------
// toy

struct ToyDataArgs {
    uint32_t classes = 3;
    uint32_t samples = 12000;
    double blob_std = 0.8;
    double flip_prob = 0.3;
    double flip_threshold = 0.6;
    uint64_t data_seed = 42;
};

lc::toy::DatasetSpec dataset_spec_from(const ToyDataArgs& a) {
    lc::toy::DatasetSpec spec = lc::toy::DatasetSpec::defaults(a.classes, a.samples);
    spec.blob_stds.assign(a.classes, a.blob_std);
    spec.flip_prob = a.flip_prob;
    spec.flip_threshold = a.flip_threshold;
    return spec;
}

struct ToyTrainArgs {
    ToyDataArgs data;
    double lr = 0.05;
    uint32_t epochs = 60;
    uint32_t batch = 64;
    uint32_t loss_samples = 30; // desk default; 150 mirrors the full-scale setup
    uint64_t seed = 1;
    std::string out_model;
};

json model_bundle(const ToyTrainArgs& a, const lc::toy::GaussianHeadModel& gm,
                  const lc::toy::PointEstimateModel& pm,
                  const lc::toy::TrainResult& g_curve, const lc::toy::TrainResult& p_curve) {
    json j;
    j["dataset"] = {{"classes", a.data.classes},
                    {"samples", a.data.samples},
                    {"blob_std", a.data.blob_std},
                    {"flip_prob", a.data.flip_prob},
                    {"flip_threshold", a.data.flip_threshold},
                    {"seed", a.data.data_seed}};
    j["train"] = {{"learning_rate", a.lr},
                  {"epochs", a.epochs},
                  {"batch_size", a.batch},
                  {"loss_samples", a.loss_samples},
                  {"seed", a.seed}};
    j["gaussian_head"] = {{"classes", gm.classes}, {"dim", gm.dim},
                          {"w_mu", gm.w_mu},       {"b_mu", gm.b_mu},
                          {"w_s", gm.w_s},         {"b_s", gm.b_s},
                          {"log_std_min", gm.log_std_min},
                          {"log_std_max", gm.log_std_max}};
    j["point"] = {{"classes", pm.classes}, {"dim", pm.dim}, {"w", pm.w}, {"b", pm.b}};
    j["epoch_loss"] = g_curve.epoch_loss;
    j["point_epoch_loss"] = p_curve.epoch_loss;
    return j;
}

int run_toy_train(const ToyTrainArgs& a) {
    const lc::toy::DatasetSpec spec = dataset_spec_from(a.data);
    const lc::toy::SyntheticDataset data = lc::toy::generate_dataset(spec, a.data.data_seed);
    auto [train_split, test_split] = lc::toy::split_even_odd(data);

    lc::toy::TrainConfig cfg;
    cfg.learning_rate = a.lr;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch;
    cfg.loss_samples = a.loss_samples;
    cfg.seed = a.seed;

    lc::toy::GaussianHeadModel gm = lc::toy::GaussianHeadModel::init(spec.classes, 2, a.seed);
    const lc::toy::TrainResult g_curve = lc::toy::train(gm, train_split, cfg);
    lc::toy::PointEstimateModel pm = lc::toy::PointEstimateModel::init(spec.classes, 2, a.seed);
    const lc::toy::TrainResult p_curve = lc::toy::train_point(pm, train_split, cfg);

    std::ofstream out(a.out_model, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + a.out_model);
    out << model_bundle(a, gm, pm, g_curve, p_curve).dump(2) << "\n";
    std::cout << "final loss: gaussian-head " << g_curve.epoch_loss.back() << ", point "
              << p_curve.epoch_loss.back() << "\n";
    return 0;
}

struct ToyEvalArgs {
    std::string model;
    std::string out_dir;
    uint32_t bins = 10;
    uint64_t eval_samples = 50;
    uint64_t seed = 7;
};

struct MethodEval {
    std::string method;
    uint64_t sample_count = 0;
    lc::ReportFile report;
};

lc::ReportFile evaluate_method(const std::string& method_label,
                               std::span<const uint32_t> pred,
                               std::span<const double> conf,
                               std::span<const uint32_t> labels, uint32_t classes,
                               uint32_t bins, uint64_t sample_count, uint64_t seed,
                               double wall_time) {
    std::vector<uint8_t> correct(labels.size());
    for (size_t i = 0; i < labels.size(); ++i) correct[i] = pred[i] == labels[i] ? 1 : 0;
    lc::ReportFile report;
    report.calibration =
        lc::make_calibration_report(conf, correct, bins, lc::BinScheme::EqualWidth);
    report.method = method_label;
    report.sample_count = sample_count;
    report.seed = seed;
    report.wall_time_seconds = wall_time;
    const lc::ConfusionMatrix cm = lc::accumulate_confusion(pred, labels, classes);
    const lc::IouResult iou = lc::miou(cm);
    report.miou = iou.mean;
    report.per_class_iou = iou.per_class;
    return report;
}

int run_toy_eval(const ToyEvalArgs& a) {
    std::ifstream in(a.model, std::ios::binary);
    if (!in) throw lc::TensorIoError(lc::TensorIoError::Kind::Io, "cannot open: " + a.model);
    json j;
    in >> j;

    lc::toy::DatasetSpec spec = lc::toy::DatasetSpec::defaults(
        j["dataset"]["classes"].get<uint32_t>(), j["dataset"]["samples"].get<uint32_t>());
    spec.blob_stds.assign(spec.classes, j["dataset"]["blob_std"].get<double>());
    spec.flip_prob = j["dataset"]["flip_prob"].get<double>();
    spec.flip_threshold = j["dataset"]["flip_threshold"].get<double>();
    const lc::toy::SyntheticDataset data =
        lc::toy::generate_dataset(spec, j["dataset"]["seed"].get<uint64_t>());
    auto [train_split, test_split] = lc::toy::split_even_odd(data);

    lc::toy::GaussianHeadModel gm;
    gm.classes = j["gaussian_head"]["classes"].get<uint32_t>();
    gm.dim = j["gaussian_head"]["dim"].get<uint32_t>();
    gm.w_mu = j["gaussian_head"]["w_mu"].get<std::vector<double>>();
    gm.b_mu = j["gaussian_head"]["b_mu"].get<std::vector<double>>();
    gm.w_s = j["gaussian_head"]["w_s"].get<std::vector<double>>();
    gm.b_s = j["gaussian_head"]["b_s"].get<std::vector<double>>();
    gm.log_std_min = j["gaussian_head"]["log_std_min"].get<double>();
    gm.log_std_max = j["gaussian_head"]["log_std_max"].get<double>();
    lc::toy::PointEstimateModel pm;
    pm.classes = j["point"]["classes"].get<uint32_t>();
    pm.dim = j["point"]["dim"].get<uint32_t>();
    pm.w = j["point"]["w"].get<std::vector<double>>();
    pm.b = j["point"]["b"].get<std::vector<double>>();

    namespace fs = std::filesystem;
    fs::create_directories(a.out_dir);
    const auto path = [&](const std::string& name) { return (fs::path(a.out_dir) / name).string(); };

    const lc::GaussianField field = lc::toy::predict_field(gm, test_split.inputs);
    const uint32_t n = static_cast<uint32_t>(test_split.size());
    const std::vector<uint32_t> dims{1, n};
    {
        std::vector<float> means(field.means.begin(), field.means.end());
        std::vector<float> stds(field.stds.begin(), field.stds.end());
        lc::write_tensor(path("test_means.glf"), lc::Tensor::from_f32({1, n, field.classes}, std::move(means)));
        lc::write_tensor(path("test_stds.glf"), lc::Tensor::from_f32({1, n, field.classes}, std::move(stds)));
        lc::write_tensor(path("test_labels.glf"), lc::Tensor::from_u32(dims, test_split.labels));
    }

    json summary;
    summary["rows"] = json::array();
    auto emit = [&](const std::string& label, const lc::FieldResult& r, uint64_t samples) {
        const double t0 = now_seconds();
        lc::ReportFile report = evaluate_method(label, r.pred, r.conf, test_split.labels,
                                                field.classes, a.bins, samples, a.seed,
                                                0.0);
        report.wall_time_seconds = now_seconds() - t0;
        lc::write_report(path("report_" + label + ".json"), report);
        lc::write_csv(path("reliability_" + label + ".csv"), report.calibration.bins);
        lc::write_reliability_svg(path("reliability_" + label + ".svg"),
                                  report.calibration.bins);
        write_maps(r, path("pred_" + label + ".glf"), path("conf_" + label + ".glf"),
                   path("unc_" + label + ".glf"));
        summary["rows"].push_back({{"method", label},
                                   {"ace", report.calibration.ace},
                                   {"ece", report.calibration.ece},
                                   {"miou", *report.miou},
                                   {"sample_count", samples}});
        std::cout << label << ": ace " << report.calibration.ace << "  ece "
                  << report.calibration.ece << "  miou " << *report.miou << "\n";
    };

    lc::EstimatorConfig cfg;
    cfg.method = lc::Method::LowerBound;
    cfg.seed = a.seed;
    emit("lower-bound", lc::field_confidence(field, cfg), 0);

    cfg.method = lc::Method::SoftmaxAvg;
    cfg.sample_count = a.eval_samples;
    emit("softmax-avg", lc::field_confidence(field, cfg), a.eval_samples);

    // point-estimate baseline: argmax softmax and its probability
    {
        const std::vector<double> probs = lc::toy::point_softmax_probs(pm, test_split.inputs);
        lc::FieldResult r;
        r.height = 1;
        r.width = n;
        r.pred.resize(n);
        r.conf.resize(n);
        r.unc.resize(n);
        for (uint32_t i = 0; i < n; ++i) {
            const std::span<const double> row{probs.data() + size_t(i) * field.classes,
                                              field.classes};
            const size_t w = lc::select_winner(row);
            r.pred[i] = static_cast<uint32_t>(w);
            r.conf[i] = row[w];
            r.unc[i] = 1.0 - row[w];
        }
        emit("point-softmax", r, 0);
    }

    std::ofstream out(path("summary.json"), std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path("summary.json"));
    out << summary.dump(2) << "\n";
    return 0;
}

struct ToyEnsembleArgs {
    ToyDataArgs data;
    std::string seeds = "1,2,3,4,5";
    std::string method = "lower-bound";
    double lr = 0.05;
    uint32_t epochs = 60;
    uint32_t batch = 64;
    uint32_t loss_samples = 30;
    uint64_t eval_samples = 50;
    uint64_t eval_seed = 7;
    uint32_t bins = 10;
    std::string out_dir;
};

int run_toy_ensemble(const ToyEnsembleArgs& a) {
    std::vector<uint64_t> seeds;
    std::string rest = a.seeds;
    while (!rest.empty()) {
        const size_t comma = rest.find(',');
        seeds.push_back(std::stoull(rest.substr(0, comma)));
        rest = comma == std::string::npos ? "" : rest.substr(comma + 1);
    }
    const lc::toy::DatasetSpec spec = dataset_spec_from(a.data);
    const lc::toy::SyntheticDataset data = lc::toy::generate_dataset(spec, a.data.data_seed);
    auto [train_split, test_split] = lc::toy::split_even_odd(data);

    lc::toy::TrainConfig cfg;
    cfg.learning_rate = a.lr;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch;
    cfg.loss_samples = a.loss_samples;
    const lc::EnsembleField e = lc::toy::train_ensemble(train_split, test_split, cfg, seeds);

    lc::EstimatorConfig ecfg;
    ecfg.method = lc::parse_method(a.method);
    ecfg.sample_count = a.eval_samples;
    ecfg.seed = a.eval_seed;
    const lc::FieldResult r = lc::ensemble_confidence(e, ecfg);

    namespace fs = std::filesystem;
    fs::create_directories(a.out_dir);
    const auto path = [&](const std::string& name) { return (fs::path(a.out_dir) / name).string(); };
    write_maps(r, path("ensemble_pred.glf"), path("ensemble_conf.glf"),
               path("ensemble_unc.glf"));
    lc::write_tensor(path("test_labels.glf"),
                     lc::Tensor::from_u32({1, static_cast<uint32_t>(test_split.size())},
                                          test_split.labels));

    lc::ReportFile report = evaluate_method(
        "ensemble-" + a.method, r.pred, r.conf, test_split.labels, data.classes, a.bins,
        a.eval_samples, a.eval_seed, 0.0);
    lc::write_report(path("report_ensemble.json"), report);
    lc::write_reliability_svg(path("reliability_ensemble.svg"), report.calibration.bins);
    std::cout << "ensemble(" << seeds.size() << " members, " << a.method << "): ace "
              << report.calibration.ace << "  miou " << *report.miou << "\n";
    if (r.nonconverged > 0) return kExitNonConvergence;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"confidence estimation for Gaussian logit classifiers"};
    app.require_subcommand(1);

    ConfidenceArgs conf_args;
    CLI::App* conf = app.add_subcommand("confidence", "per-pixel prediction/confidence/uncertainty maps");
    conf->add_option("--means", conf_args.means, "GLF1 f32 (H,W,C) logit means")->required();
    conf->add_option("--stds", conf_args.stds, "GLF1 f32 (H,W,C) logit stds")->required();
    conf->add_option("--method", conf_args.method,
                     "confidence estimator")
        ->check(CLI::IsMember({"lower-bound", "quadrature", "mc-integration", "joint-sampling", "softmax-avg"}));
    conf->add_option("--samples", conf_args.samples, "sample count for sampling methods");
    conf->add_option("--seed", conf_args.seed, "RNG seed");
    conf->add_option("--quad-points", conf_args.quad_points, "initial quadrature nodes");
    conf->add_option("--threads", conf_args.threads, "worker threads");
    conf->add_flag("--reuse-pool", conf_args.reuse_pool, "share one sample pool across pixels");
    conf->add_option("--out-pred", conf_args.out_pred)->required();
    conf->add_option("--out-conf", conf_args.out_conf)->required();
    conf->add_option("--out-unc", conf_args.out_unc)->required();

    CalibrateArgs cal_args;
    CLI::App* cal = app.add_subcommand("calibrate", "bin confidences against labels, write report");
    cal->add_option("--conf", cal_args.conf)->required();
    cal->add_option("--pred", cal_args.pred)->required();
    cal->add_option("--labels", cal_args.labels)->required();
    uint32_t ignore_value = 0;
    CLI::Option* ignore_opt = cal->add_option("--ignore", ignore_value, "label excluded from scoring");
    cal->add_option("--bins", cal_args.bins, "requested bin count");
    cal->add_option("--scheme", cal_args.scheme)
        ->check(CLI::IsMember({"equal-width", "equal-mass"}));
    cal->add_option("--out-json", cal_args.out_json)->required();
    cal->add_option("--out-csv", cal_args.out_csv);
    cal->add_option("--out-svg", cal_args.out_svg);
    cal->add_option("--method-label", cal_args.method_label, "method name recorded in the report");
    cal->add_option("--sample-count", cal_args.sample_count);
    cal->add_option("--seed", cal_args.seed);

    CompareArgs cmp_args;
    CLI::App* cmp = app.add_subcommand("compare", "per-pixel estimator comparison CSV");
    cmp->add_option("--means", cmp_args.means)->required();
    cmp->add_option("--stds", cmp_args.stds)->required();
    cmp->add_option("--mc-samples", cmp_args.mc_samples);
    cmp->add_option("--seed", cmp_args.seed);
    cmp->add_option("--quad-points", cmp_args.quad_points);
    cmp->add_option("--out-csv", cmp_args.out_csv)->required();

    EnsembleArgs ens_args;
    CLI::App* ens = app.add_subcommand("ensemble", "aggregate member fields into one map");
    ens->add_option("--member", ens_args.members, "MEANS,STDS pair (repeatable)")->required();
    ens->add_option("--method", ens_args.method)->check(CLI::IsMember({"lower-bound", "quadrature", "mc-integration", "joint-sampling", "softmax-avg"}));
    ens->add_option("--samples", ens_args.samples);
    ens->add_option("--seed", ens_args.seed);
    ens->add_option("--quad-points", ens_args.quad_points);
    ens->add_option("--threads", ens_args.threads);
    ens->add_option("--out-pred", ens_args.out_pred)->required();
    ens->add_option("--out-conf", ens_args.out_conf)->required();
    ens->add_option("--out-unc", ens_args.out_unc)->required();
    ens->add_option("--out-json", ens_args.out_json);

    BenchArgs bench_args;
    CLI::App* bench = app.add_subcommand("bench", "confidence-stage timing comparison");
    bench->add_option("--classes", bench_args.classes);
    bench->add_option("--pixels", bench_args.pixels);
    bench->add_option("--methods", bench_args.methods, "comma-separated method list");
    bench->add_option("--samples", bench_args.samples);
    bench->add_option("--repeats", bench_args.repeats);
    bench->add_option("--warmup", bench_args.warmup);
    bench->add_option("--seed", bench_args.seed);
    bench->add_option("--threads", bench_args.threads);
    bench->add_flag("--no-reuse-pool", bench_args.no_reuse_pool);
    bench->add_option("--out-json", bench_args.out_json)->required();

    CLI::App* toy = app.add_subcommand("toy", "desk-scale train/eval pipeline");
    toy->require_subcommand(1);

    auto add_data_flags = [](CLI::App* cmd, ToyDataArgs& d) {
        cmd->add_option("--classes", d.classes);
        cmd->add_option("--data-samples", d.samples);
        cmd->add_option("--blob-std", d.blob_std);
        cmd->add_option("--flip-prob", d.flip_prob);
        cmd->add_option("--flip-threshold", d.flip_threshold);
        cmd->add_option("--data-seed", d.data_seed);
    };

    ToyTrainArgs tt_args;
    CLI::App* tt = toy->add_subcommand("train", "train gaussian-head and point models");
    add_data_flags(tt, tt_args.data);
    tt->add_option("--lr", tt_args.lr);
    tt->add_option("--epochs", tt_args.epochs);
    tt->add_option("--batch", tt_args.batch);
    tt->add_option("--loss-samples", tt_args.loss_samples, "T logit samples per forward pass");
    tt->add_option("--seed", tt_args.seed);
    tt->add_option("--out-model", tt_args.out_model)->required();

    ToyEvalArgs te_args;
    CLI::App* te = toy->add_subcommand("eval", "evaluate a trained model bundle");
    te->add_option("--model", te_args.model)->required();
    te->add_option("--out-dir", te_args.out_dir)->required();
    te->add_option("--bins", te_args.bins);
    te->add_option("--eval-samples", te_args.eval_samples, "T for the softmax-avg baseline");
    te->add_option("--seed", te_args.seed, "evaluation RNG seed");

    ToyEnsembleArgs ten_args;
    CLI::App* ten = toy->add_subcommand("ensemble", "train member models and aggregate");
    add_data_flags(ten, ten_args.data);
    ten->add_option("--seeds", ten_args.seeds, "comma-separated member seeds");
    ten->add_option("--method", ten_args.method)->check(CLI::IsMember({"lower-bound", "quadrature", "mc-integration", "joint-sampling", "softmax-avg"}));
    ten->add_option("--lr", ten_args.lr);
    ten->add_option("--epochs", ten_args.epochs);
    ten->add_option("--batch", ten_args.batch);
    ten->add_option("--loss-samples", ten_args.loss_samples);
    ten->add_option("--eval-samples", ten_args.eval_samples);
    ten->add_option("--eval-seed", ten_args.eval_seed);
    ten->add_option("--bins", ten_args.bins);
    ten->add_option("--out-dir", ten_args.out_dir)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (*conf) return run_confidence(conf_args);
        if (*cal) {
            if (ignore_opt->count() > 0) cal_args.ignore = ignore_value;
            return run_calibrate(cal_args);
        }
        if (*cmp) return run_compare(cmp_args);
        if (*ens) return run_ensemble(ens_args);
        if (*bench) return run_bench(bench_args);
        if (*toy) {
            if (*tt) return run_toy_train(tt_args);
            if (*te) return run_toy_eval(te_args);
            if (*ten) return run_toy_ensemble(ten_args);
        }
    } catch (const lc::TensorIoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const NonConvergence& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNonConvergence;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitShape;
    } catch (const std::out_of_range& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitShape;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return 0;
}

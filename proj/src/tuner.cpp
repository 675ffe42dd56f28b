#include "berrysmith/tuner.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "berrysmith/error.hpp"
#include "berrysmith/parallel.hpp"

namespace berrysmith {

void GridSpec::validate() const {
  if (threshold_values.empty()) throw InvalidArgument("grid needs at least one threshold value");
  for (std::size_t i = 0; i < threshold_values.size(); ++i) {
    if (!(threshold_values[i] >= 0.0)) throw InvalidArgument("grid thresholds must be >= 0");
    if (i > 0 && !(threshold_values[i] > threshold_values[i - 1])) {
      throw InvalidArgument("grid thresholds must be strictly increasing");
    }
  }
  if (kernel_sizes.empty()) throw InvalidArgument("grid needs at least one kernel size");
  for (int k : kernel_sizes) {
    if (k < 1 || k % 2 == 0) throw InvalidArgument("grid kernel sizes must be odd and positive");
  }
}

std::vector<DcedParams> enumerate_grid(const GridSpec& spec) {
  spec.validate();
  const auto& v = spec.threshold_values;
  const std::size_t n = v.size();
  std::vector<DcedParams> out;
  for (int k : spec.kernel_sizes) {
    for (std::size_t a = 0; a < n; ++a) {          // wth_min
      for (std::size_t b = a + 1; b < n; ++b) {    // wth_max > wth_min
        for (std::size_t c = a; c < n; ++c) {      // nth_min >= wth_min
          for (std::size_t d = std::max(c, b) + 1; d < n; ++d) {  // nth_max > both
            out.push_back(DcedParams{k, {v[a], v[b]}, {v[c], v[d]}});
          }
        }
      }
    }
  }
  return out;
}

namespace {

struct SeparatorScore {
  double threshold = 0.0;
  // tp * n_normal + tn * n_anomalous; proportional to balanced accuracy.
  std::int64_t score = 0;
};

SeparatorScore separate(std::span<const std::int64_t> normal,
                        std::span<const std::int64_t> anomalous) {
  if (normal.empty() || anomalous.empty()) {
    throw InvalidArgument("separator needs at least one sample of each class");
  }
  std::vector<std::int64_t> sn(normal.begin(), normal.end());
  std::vector<std::int64_t> sa(anomalous.begin(), anomalous.end());
  std::sort(sn.begin(), sn.end());
  std::sort(sa.begin(), sa.end());
  std::vector<std::int64_t> values;
  values.reserve(sn.size() + sa.size());
  std::merge(sn.begin(), sn.end(), sa.begin(), sa.end(), std::back_inserter(values));
  values.erase(std::unique(values.begin(), values.end()), values.end());

  const auto n_normal = static_cast<std::int64_t>(sn.size());
  const auto n_anomalous = static_cast<std::int64_t>(sa.size());
  auto score_at = [&](double t) {
    // tn = normals <= t, tp = anomalies > t.
    const auto tn = std::upper_bound(sn.begin(), sn.end(), t,
                                     [](double x, std::int64_t y) { return x < y; }) -
                    sn.begin();
    const auto below_a = std::upper_bound(sa.begin(), sa.end(), t,
                                          [](double x, std::int64_t y) { return x < y; }) -
                         sa.begin();
    const std::int64_t tp = n_anomalous - below_a;
    return tp * n_normal + tn * n_anomalous;
  };

  SeparatorScore best{static_cast<double>(values.front()) - 1.0, -1};
  auto consider = [&](double t) {
    const std::int64_t s = score_at(t);
    if (s > best.score) best = {t, s};
  };
  consider(static_cast<double>(values.front()) - 1.0);
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    consider(0.5 * (static_cast<double>(values[i]) + static_cast<double>(values[i + 1])));
  }
  consider(static_cast<double>(values.back()) + 1.0);
  return best;
}

double to_balanced_accuracy(std::int64_t score, std::int64_t n_normal, std::int64_t n_anomalous) {
  return static_cast<double>(score) / (2.0 * static_cast<double>(n_normal) * n_anomalous);
}

struct SplitCounts {
  std::vector<std::size_t> normal;
  std::vector<std::size_t> anomalous;
};

SplitCounts split_by_label(std::span<const LabeledPatch> patches) {
  SplitCounts s;
  for (std::size_t i = 0; i < patches.size(); ++i) {
    (patches[i].label == Label::Anomalous ? s.anomalous : s.normal).push_back(i);
  }
  return s;
}

}  // namespace

Separator best_separator(std::span<const std::int64_t> counts_normal,
                         std::span<const std::int64_t> counts_anomalous) {
  const SeparatorScore s = separate(counts_normal, counts_anomalous);
  return {s.threshold, to_balanced_accuracy(s.score, static_cast<std::int64_t>(counts_normal.size()),
                                            static_cast<std::int64_t>(counts_anomalous.size()))};
}

TuneReport tune_report(std::span<const LabeledPatch> train, const GridSpec& spec, int workers) {
  const SplitCounts split = split_by_label(train);
  if (split.normal.empty() || split.anomalous.empty()) {
    throw InvalidArgument("tuning needs both normal and anomalous training patches");
  }
  const std::vector<DcedParams> grid = enumerate_grid(spec);
  if (grid.empty()) throw InvalidArgument("grid spec admits no valid DCED parameters");
  const auto& values = spec.threshold_values;
  const std::size_t nv = values.size();
  const std::size_t np = train.size();

  // edge_counts[k][patch][a * nv + b] = hysteresis edge count for thresholds
  // (values[a], values[b]), b > a. Narrow maps are subsets of wide ones for
  // every valid tuple, so diff_count = wide - narrow.
  const std::size_t nk = spec.kernel_sizes.size();
  std::vector<std::vector<std::vector<std::int64_t>>> edge_counts(
      nk, std::vector<std::vector<std::int64_t>>(np, std::vector<std::int64_t>(nv * nv, 0)));
  parallel_for(nk * np, workers, [&](std::size_t job) {
    const std::size_t k = job / np;
    const std::size_t p = job % np;
    const SuppressedMagnitude mag = suppress_non_maxima(train[p].image, spec.kernel_sizes[k]);
    auto& row = edge_counts[k][p];
    for (std::size_t a = 0; a + 1 < nv; ++a) {
      std::span<const double> maxes(values.data() + a + 1, nv - a - 1);
      const auto counts = hysteresis_counts(mag, values[a], maxes);
      for (std::size_t b = a + 1; b < nv; ++b) row[a * nv + b] = counts[b - a - 1];
    }
  });

  auto index_of = [&](double t) {
    return static_cast<std::size_t>(std::lower_bound(values.begin(), values.end(), t) -
                                    values.begin());
  };
  std::map<int, std::size_t> kernel_index;
  for (std::size_t k = 0; k < nk; ++k) kernel_index.emplace(spec.kernel_sizes[k], k);

  const auto n_normal = static_cast<std::int64_t>(split.normal.size());
  const auto n_anomalous = static_cast<std::int64_t>(split.anomalous.size());
  std::vector<SeparatorScore> scores(grid.size());
  parallel_for(grid.size(), workers, [&](std::size_t g) {
    const DcedParams& p = grid[g];
    const std::size_t k = kernel_index.at(p.kernel_size);
    const std::size_t wide = index_of(p.wide.th_min) * nv + index_of(p.wide.th_max);
    const std::size_t narrow = index_of(p.narrow.th_min) * nv + index_of(p.narrow.th_max);
    std::vector<std::int64_t> cn, ca;
    cn.reserve(split.normal.size());
    ca.reserve(split.anomalous.size());
    for (std::size_t i : split.normal) {
      cn.push_back(edge_counts[k][i][wide] - edge_counts[k][i][narrow]);
    }
    for (std::size_t i : split.anomalous) {
      ca.push_back(edge_counts[k][i][wide] - edge_counts[k][i][narrow]);
    }
    scores[g] = separate(cn, ca);
  });

  TuneReport report;
  report.candidates.reserve(grid.size());
  std::size_t best = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    report.candidates.push_back({grid[g], scores[g].threshold,
                                 to_balanced_accuracy(scores[g].score, n_normal, n_anomalous),
                                 std::nullopt});
    // Strict improvement or a lexicographically smaller key on a tie. The grid
    // is enumerated in key order only when kernel sizes are ascending.
    if (scores[g].score > scores[best].score ||
        (scores[g].score == scores[best].score && grid[g].key() < grid[best].key())) {
      best = g;
    }
  }
  const CandidateScore& c = report.candidates[best];
  report.best = TunedDced{c.params, c.count_threshold, c.train_balanced_accuracy, std::nullopt};
  return report;
}

TunedDced tune(std::span<const LabeledPatch> train, const GridSpec& spec, int workers) {
  return tune_report(train, spec, workers).best;
}

std::int64_t patch_edge_count(const ImageGray& patch, const DcedParams& params) {
  return dced(patch, params).diff_count;
}

TunedDced select_by_validation(TuneReport& report, std::span<const LabeledPatch> validation,
                               int top_m) {
  const SplitCounts split = split_by_label(validation);
  if (split.normal.empty() || split.anomalous.empty()) {
    throw InvalidArgument("validation needs both normal and anomalous patches");
  }
  if (report.candidates.empty()) throw InvalidArgument("empty tuning report");

  std::vector<std::size_t> order(report.candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ca = report.candidates[a];
    const auto& cb = report.candidates[b];
    if (ca.train_balanced_accuracy != cb.train_balanced_accuracy) {
      return ca.train_balanced_accuracy > cb.train_balanced_accuracy;
    }
    return ca.params.key() < cb.params.key();
  });
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(std::max(top_m, 1))));

  const auto n_normal = static_cast<std::int64_t>(split.normal.size());
  const auto n_anomalous = static_cast<std::int64_t>(split.anomalous.size());
  std::int64_t best_score = -1;
  std::size_t best = order.front();
  for (std::size_t idx : order) {
    CandidateScore& c = report.candidates[idx];
    std::int64_t tp = 0, tn = 0;
    for (const LabeledPatch& patch : validation) {
      const bool predicted = static_cast<double>(patch_edge_count(patch.image, c.params)) >
                             c.count_threshold;
      if (patch.label == Label::Anomalous && predicted) ++tp;
      if (patch.label == Label::Normal && !predicted) ++tn;
    }
    const std::int64_t score = tp * n_normal + tn * n_anomalous;
    c.val_balanced_accuracy = to_balanced_accuracy(score, n_normal, n_anomalous);
    if (score > best_score) {
      best_score = score;
      best = idx;
    }
  }
  const CandidateScore& c = report.candidates[best];
  report.best = TunedDced{c.params, c.count_threshold, c.train_balanced_accuracy,
                          c.val_balanced_accuracy};
  return report.best;
}

Label classify_baseline(const ImageGray& patch, const TunedDced& model) {
  return static_cast<double>(patch_edge_count(patch, model.params)) > model.count_threshold
             ? Label::Anomalous
             : Label::Normal;
}

Metrics evaluate(std::span<const Label> predictions, std::span<const Label> truths) {
  if (predictions.size() != truths.size()) {
    throw InvalidArgument("predictions and truths differ in length");
  }
  if (predictions.empty()) throw InvalidArgument("cannot evaluate an empty prediction list");
  Metrics m;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const bool pred = predictions[i] == Label::Anomalous;
    const bool truth = truths[i] == Label::Anomalous;
    if (pred && truth) ++m.tp;
    if (!pred && !truth) ++m.tn;
    if (pred && !truth) ++m.fp;
    if (!pred && truth) ++m.fn;
  }
  auto ratio = [](std::int64_t num, std::int64_t den, bool& undefined) {
    undefined = den == 0;
    return undefined ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  m.precision = ratio(m.tp, m.tp + m.fp, m.precision_undefined);
  m.recall = ratio(m.tp, m.tp + m.fn, m.recall_undefined);
  bool specificity_undefined = false;
  const double specificity = ratio(m.tn, m.tn + m.fp, specificity_undefined);
  m.f1_undefined = m.precision_undefined || m.recall_undefined || m.precision + m.recall == 0.0;
  m.f1 = m.f1_undefined ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  m.balanced_accuracy_undefined = m.recall_undefined || specificity_undefined;
  m.balanced_accuracy = m.balanced_accuracy_undefined ? 0.0 : 0.5 * (m.recall + specificity);
  return m;
}

std::string tuned_dced_to_json(const TunedDced& model) {
  nlohmann::ordered_json doc;
  doc["schema_version"] = kTunedDcedSchemaVersion;
  doc["kernel_size"] = model.params.kernel_size;
  doc["wth_min"] = model.params.wide.th_min;
  doc["wth_max"] = model.params.wide.th_max;
  doc["nth_min"] = model.params.narrow.th_min;
  doc["nth_max"] = model.params.narrow.th_max;
  doc["count_threshold"] = model.count_threshold;
  doc["train_ba"] = model.train_balanced_accuracy;
  doc["val_ba"] = model.val_balanced_accuracy ? nlohmann::ordered_json(*model.val_balanced_accuracy)
                                              : nlohmann::ordered_json(nullptr);
  return doc.dump(2) + "\n";
}

TunedDced tuned_dced_from_json(std::string_view text) {
  try {
    const auto doc = nlohmann::json::parse(text.begin(), text.end());
    if (doc.at("schema_version").get<int>() != kTunedDcedSchemaVersion) {
      throw DataError("tuned model: unsupported schema version");
    }
    TunedDced m;
    m.params.kernel_size = doc.at("kernel_size").get<int>();
    m.params.wide = {doc.at("wth_min").get<double>(), doc.at("wth_max").get<double>()};
    m.params.narrow = {doc.at("nth_min").get<double>(), doc.at("nth_max").get<double>()};
    m.count_threshold = doc.at("count_threshold").get<double>();
    m.train_balanced_accuracy = doc.at("train_ba").get<double>();
    if (const auto& v = doc.at("val_ba"); !v.is_null()) m.val_balanced_accuracy = v.get<double>();
    if (!m.params.valid()) throw DataError("tuned model: parameters violate DCED constraints");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("tuned model: ") + e.what());
  }
}

void write_tuned_dced(const std::filesystem::path& path, const TunedDced& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << tuned_dced_to_json(model);
}

TunedDced read_tuned_dced(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open tuned model " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return tuned_dced_from_json(ss.str());
}

}  // namespace berrysmith

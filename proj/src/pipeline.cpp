#include "shapeprior/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "shapeprior/checkpoint.hpp"
#include "shapeprior/inference.hpp"
#include "shapeprior/lda.hpp"
#include "shapeprior/manifest.hpp"
#include "shapeprior/rng.hpp"
#include "shapeprior/voxl_io.hpp"

namespace shapeprior {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool anomalous_group(Group g) {
  return g == Group::kSarcopenic || g == Group::kSyntheticAnomalous;
}

std::string scan_id_of(const PopulationFile& row) {
  return row.subject_id + "_s" + std::to_string(row.scan_index);
}

void write_text(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << body;
  if (!out.flush()) throw std::runtime_error("write failed: " + path.string());
}

std::vector<PopulationFile> load_rows(const std::filesystem::path& data_dir) {
  return load_manifest_csv(data_dir / "manifest.csv");
}

// rows for the listed subjects, sorted by (subject, scan); every listed
// subject must exist
std::vector<PopulationFile> select_rows(const std::vector<PopulationFile>& rows,
                                        const std::vector<std::string>& subjects) {
  std::set<std::string> want(subjects.begin(), subjects.end());
  std::set<std::string> seen;
  std::vector<PopulationFile> out;
  for (const PopulationFile& r : rows)
    if (want.count(r.subject_id)) {
      out.push_back(r);
      seen.insert(r.subject_id);
    }
  for (const std::string& s : subjects)
    if (!seen.count(s))
      throw ConfigError("subject '" + s + "' not present in the manifest");
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::tie(a.subject_id, a.scan_index) < std::tie(b.subject_id, b.scan_index);
  });
  return out;
}

nlohmann::ordered_json five_number_summary(std::vector<double> values) {
  nlohmann::ordered_json j;
  j["n"] = values.size();
  if (values.empty()) return j;
  j["min"] = percentile_linear(values, 0.0);
  j["q1"] = percentile_linear(values, 25.0);
  j["median"] = percentile_linear(values, 50.0);
  j["q3"] = percentile_linear(values, 75.0);
  j["max"] = percentile_linear(values, 100.0);
  return j;
}

std::string render_lda_svg(const std::vector<LatentPoint>& points) {
  const double W = 640.0, H = 480.0, M = 48.0;
  double ulo = 0.0, uhi = 1.0, vlo = 0.0, vhi = 1.0;
  if (!points.empty()) {
    ulo = uhi = points[0].u;
    vlo = vhi = points[0].v;
    for (const LatentPoint& p : points) {
      ulo = std::min(ulo, p.u); uhi = std::max(uhi, p.u);
      vlo = std::min(vlo, p.v); vhi = std::max(vhi, p.v);
    }
  }
  const double upad = std::max(1e-9, (uhi - ulo) * 0.08);
  const double vpad = std::max(1e-9, (vhi - vlo) * 0.08);
  ulo -= upad; uhi += upad; vlo -= vpad; vhi += vpad;
  auto px = [&](double u) { return M + (u - ulo) / (uhi - ulo) * (W - 2 * M); };
  auto py = [&](double v) { return H - M - (v - vlo) / (vhi - vlo) * (H - 2 * M); };

  auto color_of = [](const LatentPoint& p) -> const char* {
    if (p.is_train)
      return p.scan_id.rfind("nb", 0) == 0 ? "#66ccee" : "#4477aa";
    return p.group == "synthetic_anomalous" || p.group == "sarcopenic"
               ? "#ee6677"
               : "#228833";
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
         "viewBox=\"0 0 640 480\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"640\" height=\"480\" fill=\"#ffffff\"/>\n"
      << "<rect x=\"48\" y=\"48\" width=\"544\" height=\"384\" fill=\"none\" "
         "stroke=\"#888888\"/>\n"
      << "<text x=\"320\" y=\"470\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\">discriminant axis 1</text>\n"
      << "<text x=\"16\" y=\"240\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\" transform=\"rotate(-90 16 240)\">axis 2</text>\n";
  char buf[160];
  for (const LatentPoint& p : points) {
    std::snprintf(buf, sizeof buf,
                  "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"%.1f\" fill=\"%s\" "
                  "stroke=\"%s\" stroke-width=\"1\"/>\n",
                  px(p.u), py(p.v), p.is_train ? 4.0 : 5.0, color_of(p),
                  p.is_train ? "none" : "#222222");
    svg << buf;
  }
  svg << "<circle cx=\"60\" cy=\"20\" r=\"4\" fill=\"#4477aa\"/>"
         "<text x=\"70\" y=\"24\" font-family=\"sans-serif\" font-size=\"12\">"
         "train cohort a</text>\n"
      << "<circle cx=\"190\" cy=\"20\" r=\"4\" fill=\"#66ccee\"/>"
         "<text x=\"200\" y=\"24\" font-family=\"sans-serif\" font-size=\"12\">"
         "train cohort b</text>\n"
      << "<circle cx=\"320\" cy=\"20\" r=\"5\" fill=\"#228833\" stroke=\"#222222\"/>"
         "<text x=\"330\" y=\"24\" font-family=\"sans-serif\" font-size=\"12\">"
         "test normal</text>\n"
      << "<circle cx=\"450\" cy=\"20\" r=\"5\" fill=\"#ee6677\" stroke=\"#222222\"/>"
         "<text x=\"460\" y=\"24\" font-family=\"sans-serif\" font-size=\"12\">"
         "test anomalous</text>\n"
      << "</svg>\n";
  return svg.str();
}

} // namespace

SynthOutcome run_synth(const AppConfig& cfg, const std::filesystem::path& data_dir) {
  const auto t0 = Clock::now();
  validate_config(cfg);

  AppConfig c = cfg;
  c.pop.seed = cfg.seed;
  SynthOutcome outcome;
  outcome.rows = generate_population(c.pop, data_dir);

  RunManifest m;
  m.command = "synth";
  m.seed = cfg.seed;
  m.config = config_snapshot(cfg);
  std::vector<std::string> rels{"manifest.csv"};
  for (const PopulationFile& r : outcome.rows) rels.push_back(r.path);
  m.outputs = collect_outputs(data_dir, std::move(rels));
  m.duration_sec = seconds_since(t0);
  write_run_manifest(data_dir / "run_manifest.json", m);
  return outcome;
}

TrainOutcome run_train(const AppConfig& cfg, const std::filesystem::path& data_dir,
                       const std::filesystem::path& out_dir,
                       const std::vector<std::string>& train_subjects,
                       const TrainObserver& observer) {
  const auto t0 = Clock::now();
  validate_config(cfg);
  const std::vector<PopulationFile> all = load_rows(data_dir);

  std::vector<PopulationFile> rows;
  if (train_subjects.empty()) {
    for (const PopulationFile& r : all)
      if (!anomalous_group(r.group)) rows.push_back(r);
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
      return std::tie(a.subject_id, a.scan_index) <
             std::tie(b.subject_id, b.scan_index);
    });
  } else {
    rows = select_rows(all, train_subjects);
  }
  if (rows.empty()) throw ConfigError("training set is empty");
  for (const PopulationFile& r : rows)
    if (anomalous_group(r.group))
      throw ConfigError("training set contains anomalous subject '" +
                        r.subject_id + "'");
  std::set<std::string> ids;
  for (const PopulationFile& r : rows)
    if (!ids.insert(scan_id_of(r)).second)
      throw ConfigError("duplicate scan id '" + scan_id_of(r) + "' in manifest");

  std::vector<VoxelGrid> grids;
  TrainOutcome outcome;
  for (const PopulationFile& r : rows) {
    VoxelGrid g = read_voxl_binary(data_dir / r.path);
    g.subject_id = scan_id_of(r);
    g.group = r.group;
    outcome.scan_ids.push_back(g.subject_id);
    grids.push_back(std::move(g));
  }

  TrainConfig tc = cfg.train;
  tc.seed = mix_seed(cfg.seed, 0x7A1);
  std::filesystem::create_directories(out_dir);
  outcome.prior = train(grids, tc, observer);

  save_checkpoint(out_dir / "model.inrc", outcome.prior.model);
  LatentTable table;
  table.d = cfg.train.d;
  for (std::size_t i = 0; i < outcome.scan_ids.size(); ++i)
    table.entries.emplace_back(outcome.scan_ids[i], outcome.prior.latents[i]);
  save_latents(out_dir / "latents.ltab", table);

  std::ostringstream loss;
  loss << "epoch,mean_soft_dice,mean_ce,mean_latent_reg,mean_total\n";
  for (std::size_t e = 0; e < outcome.prior.history.size(); ++e) {
    const EpochStats& s = outcome.prior.history[e];
    loss << (e + 1) << ',' << fmt17(s.soft_dice) << ',' << fmt17(s.cross_entropy)
         << ',' << fmt17(s.latent_reg) << ',' << fmt17(s.total) << '\n';
  }
  write_text(out_dir / "loss.csv", loss.str());

  RunManifest m;
  m.command = "train";
  m.seed = cfg.seed;
  m.config = config_snapshot(cfg);
  m.inputs.push_back((data_dir / "manifest.csv").generic_string());
  m.outputs = collect_outputs(out_dir, {"model.inrc", "latents.ltab", "loss.csv"});
  m.duration_sec = seconds_since(t0);
  write_run_manifest(out_dir / "run_manifest.json", m);
  return outcome;
}

EvalOutcome run_eval(const AppConfig& cfg, const std::filesystem::path& data_dir,
                     const std::filesystem::path& ckpt_dir,
                     const std::filesystem::path& out_dir,
                     const std::vector<std::string>& test_subjects) {
  const auto t0 = Clock::now();
  validate_config(cfg);
  const std::vector<PopulationFile> all = load_rows(data_dir);
  const ShapePriorModel model = load_checkpoint(ckpt_dir / "model.inrc");
  const LatentTable table = load_latents(ckpt_dir / "latents.ltab");

  std::set<std::string> train_scan_ids;
  for (const auto& [id, z] : table.entries) train_scan_ids.insert(id);

  std::vector<PopulationFile> rows;
  if (test_subjects.empty()) {
    std::set<std::string> test_set;
    for (const PopulationFile& r : all)
      if (!train_scan_ids.count(scan_id_of(r))) test_set.insert(r.subject_id);
    rows = select_rows(all, {test_set.begin(), test_set.end()});
  } else {
    rows = select_rows(all, test_subjects);
  }
  if (rows.empty()) throw ConfigError("evaluation set is empty");

  std::map<std::string, Group> group_by_scan;
  for (const PopulationFile& r : all) group_by_scan[scan_id_of(r)] = r.group;

  std::filesystem::create_directories(out_dir);

  EvalOutcome outcome;
  std::vector<ShapeRecord> records;
  std::vector<std::pair<std::string, std::vector<double>>> test_latents;
  const std::uint64_t eval_seed = mix_seed(cfg.seed, 0x1F0);
  for (const PopulationFile& r : rows) {
    VoxelGrid g = read_voxl_binary(data_dir / r.path);
    const std::string id = scan_id_of(r);
    InferConfig ic = cfg.infer;
    ic.seed = mix_seed(eval_seed, hash_str(id));
    const InferResult res = infer_latent(model, g, ic);

    ShapeRecord rec;
    rec.subject_id = id;
    rec.group = r.group;
    rec.dice = res.dice_vs_input;
    rec.vol_err_cm3 = res.vol_err_cm3;
    rec.vol_err_pct = res.vol_err_pct;
    rec.final_loss = res.final_loss;
    rec.volume_cm3 = volume_cm3(g);
    records.push_back(std::move(rec));
    test_latents.emplace_back(id, res.z);
  }

  std::vector<double> normal_dice;
  for (const ShapeRecord& rec : records)
    if (!anomalous_group(rec.group)) normal_dice.push_back(rec.dice);
  if (normal_dice.size() < 2)
    throw std::runtime_error("eval needs at least two held-out normal scans");
  const double tau = calibrate_threshold(normal_dice, cfg.threshold_quantile);
  outcome.report = build_report(std::move(records), tau);

  std::ostringstream scores;
  scores << "subject_id,group,dice,vol_err_cm3,vol_err_pct,final_loss\n";
  for (const ShapeRecord& rec : outcome.report.records)
    scores << rec.subject_id << ',' << group_name(rec.group) << ','
           << fmt17(rec.dice) << ',' << fmt17(rec.vol_err_cm3) << ','
           << fmt17(rec.vol_err_pct) << ',' << fmt17(rec.final_loss) << '\n';
  write_text(out_dir / "scores.csv", scores.str());

  // discriminant projection of the latent table, labeled by subject prefix
  std::vector<std::vector<double>> train_z;
  std::vector<std::string> train_labels;
  for (const auto& [id, z] : table.entries) {
    train_z.push_back(z);
    train_labels.push_back(id.substr(0, 2));
  }
  std::map<std::string, int> label_counts;
  for (const std::string& l : train_labels) ++label_counts[l];
  const bool can_fit = model.d >= 2 && label_counts.size() >= 2 &&
                       std::all_of(label_counts.begin(), label_counts.end(),
                                   [](const auto& kv) { return kv.second >= 2; });
  std::vector<std::string> written;
  written.insert(written.end(), {"scores.csv", "report.json"});

  nlohmann::ordered_json lda_json;
  if (can_fit) {
    const LdaProjection proj = lda_fit(train_z, train_labels);
    outcome.lda_available = true;

    std::map<std::string, std::vector<std::array<double, 2>>> by_label;
    for (std::size_t i = 0; i < table.entries.size(); ++i) {
      const auto& [id, z] = table.entries[i];
      const std::array<double, 2> uv = proj.project(z);
      by_label[train_labels[i]].push_back(uv);
      LatentPoint p;
      p.scan_id = id;
      const auto it = group_by_scan.find(id);
      p.group = it == group_by_scan.end() ? "train" : group_name(it->second);
      p.is_train = true;
      p.u = uv[0];
      p.v = uv[1];
      outcome.lda_points.push_back(std::move(p));
    }

    std::vector<std::array<double, 2>> hull_ref;
    for (const auto& [label, pts] : by_label)
      hull_ref.insert(hull_ref.end(), pts.begin(), pts.end());

    std::vector<std::array<double, 2>> normal_test_pts;
    for (const auto& [id, z] : test_latents) {
      const std::array<double, 2> uv = proj.project(z);
      LatentPoint p;
      p.scan_id = id;
      p.group = group_name(group_by_scan.at(id));
      p.is_train = false;
      p.u = uv[0];
      p.v = uv[1];
      if (!anomalous_group(group_by_scan.at(id))) normal_test_pts.push_back(uv);
      outcome.lda_points.push_back(std::move(p));
    }

    const auto first = by_label.begin();
    const auto second = std::next(first);
    outcome.lda_balanced_accuracy =
        fisher_balanced_accuracy_2d(first->second, second->second);
    outcome.lda_hull_containment =
        normal_test_pts.empty()
            ? 1.0
            : convex_hull_containment(hull_ref, normal_test_pts);

    std::ostringstream lda_csv;
    lda_csv << "subject_id,group,u,v\n";
    for (const LatentPoint& p : outcome.lda_points)
      lda_csv << p.scan_id << ',' << p.group << ',' << fmt17(p.u) << ','
              << fmt17(p.v) << '\n';
    write_text(out_dir / "lda.csv", lda_csv.str());
    write_text(out_dir / "lda.svg", render_lda_svg(outcome.lda_points));
    written.insert(written.end(), {"lda.csv", "lda.svg"});

    lda_json["balanced_accuracy"] = outcome.lda_balanced_accuracy;
    lda_json["hull_containment"] = outcome.lda_hull_containment;
    lda_json["eigenvalues"] = proj.eigenvalues;
  } else {
    lda_json = nullptr;
  }

  nlohmann::ordered_json rep;
  rep["threshold"] = outcome.report.threshold;
  rep["auc"] = outcome.report.auc;
  rep["volume_auc"] = outcome.report.volume_auc;
  rep["group_mean_dice"] = outcome.report.group_mean_dice;
  rep["lda"] = std::move(lda_json);
  nlohmann::ordered_json recs = nlohmann::ordered_json::array();
  for (const ShapeRecord& rec : outcome.report.records) {
    nlohmann::ordered_json jr;
    jr["subject_id"] = rec.subject_id;
    jr["group"] = group_name(rec.group);
    jr["dice"] = rec.dice;
    jr["vol_err_cm3"] = rec.vol_err_cm3;
    jr["vol_err_pct"] = rec.vol_err_pct;
    jr["final_loss"] = rec.final_loss;
    jr["volume_cm3"] = rec.volume_cm3;
    jr["verdict"] = verdict_name(rec.verdict);
    recs.push_back(std::move(jr));
  }
  rep["records"] = std::move(recs);
  write_text(out_dir / "report.json", rep.dump(2) + "\n");

  RunManifest m;
  m.command = "eval";
  m.seed = cfg.seed;
  m.config = config_snapshot(cfg);
  m.inputs = {(data_dir / "manifest.csv").generic_string(),
              (ckpt_dir / "model.inrc").generic_string(),
              (ckpt_dir / "latents.ltab").generic_string()};
  m.outputs = collect_outputs(out_dir, std::move(written));
  m.duration_sec = seconds_since(t0);
  write_run_manifest(out_dir / "run_manifest.json", m);
  return outcome;
}

XvalOutcome run_xval(const AppConfig& cfg, const std::filesystem::path& data_dir,
                     const std::filesystem::path& out_dir,
                     std::optional<int> only_fold) {
  const auto t0 = Clock::now();
  validate_config(cfg);
  const std::vector<PopulationFile> all = load_rows(data_dir);

  std::map<std::string, bool> subject_anom;
  for (const PopulationFile& r : all) {
    auto [it, inserted] = subject_anom.emplace(r.subject_id, anomalous_group(r.group));
    if (!inserted && it->second != anomalous_group(r.group))
      throw ConfigError("subject '" + r.subject_id + "' has inconsistent groups");
  }
  std::vector<SubjectEntry> subjects;
  for (const auto& [id, anom] : subject_anom) subjects.push_back({id, anom});

  XvalOutcome outcome;
  try {
    outcome.plan = make_folds(subjects, cfg.k, cfg.seed);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (only_fold && (*only_fold < 0 || *only_fold >= cfg.k))
    throw ConfigError("fold index out of range");

  outcome.folds.resize(cfg.k);
  std::filesystem::create_directories(out_dir);
  for (int f = 0; f < cfg.k; ++f) {
    if (only_fold && *only_fold != f) continue;
    const std::filesystem::path fold_dir = out_dir / ("fold_" + std::to_string(f));
    run_train(cfg, data_dir, fold_dir, outcome.plan.train_subjects[f]);
    outcome.folds[f] =
        run_eval(cfg, data_dir, fold_dir, fold_dir, outcome.plan.test_subjects[f]);
  }

  std::vector<std::string> written;
  if (!only_fold) {
    std::vector<double> normal_dice, anom_dice, aucs;
    for (const EvalOutcome& fold : outcome.folds) {
      for (const ShapeRecord& rec : fold.report.records)
        (anomalous_group(rec.group) ? anom_dice : normal_dice).push_back(rec.dice);
      aucs.push_back(fold.report.auc);
    }
    nlohmann::ordered_json j;
    j["k"] = cfg.k;
    j["test_normal"] = five_number_summary(std::move(normal_dice));
    j["test_anomalous"] = five_number_summary(std::move(anom_dice));
    j["auc_per_fold"] = aucs;
    double mean_auc = 0.0;
    for (double a : aucs) mean_auc += a;
    j["mean_auc"] = aucs.empty() ? 0.0 : mean_auc / static_cast<double>(aucs.size());
    write_text(out_dir / "summary.json", j.dump(2) + "\n");
    written.push_back("summary.json");
  }

  RunManifest m;
  m.command = "xval";
  m.seed = cfg.seed;
  m.config = config_snapshot(cfg);
  m.inputs = {(data_dir / "manifest.csv").generic_string()};
  m.outputs = collect_outputs(out_dir, std::move(written));
  m.duration_sec = seconds_since(t0);
  write_run_manifest(out_dir / "run_manifest.json", m);
  return outcome;
}

} // namespace shapeprior

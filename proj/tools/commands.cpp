#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <sstream>

#include "ssqp/baselines.hpp"
#include "ssqp/boost.hpp"
#include "ssqp/csv.hpp"
#include "ssqp/error.hpp"
#include "ssqp/parallel.hpp"
#include "ssqp/pcagg.hpp"

namespace ssqp::cli {

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const int c_id = table.require_column("content_id");
  const int c_ref = table.require_column("ref_path");
  const int c_test = table.require_column("test_path");
  const int c_mos = table.column("mos");
  const int c_tags = table.column("tags");
  const auto base = path.parent_path();
  std::vector<ManifestRow> rows;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& f = table.rows[r];
    const std::string where = "manifest row " + std::to_string(r + 1);
    ManifestRow row;
    row.content_id = f[static_cast<std::size_t>(c_id)];
    if (row.content_id.empty()) throw ParseError(where + ": content_id is empty");
    row.ref_path = base / f[static_cast<std::size_t>(c_ref)];
    row.test_path = base / f[static_cast<std::size_t>(c_test)];
    if (c_mos >= 0 && !f[static_cast<std::size_t>(c_mos)].empty()) {
      row.mos = parse_real(f[static_cast<std::size_t>(c_mos)], where + " mos");
    }
    if (c_tags >= 0) {
      std::istringstream tags(f[static_cast<std::size_t>(c_tags)]);
      std::string item;
      while (std::getline(tags, item, ';')) {
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ParseError(where + ": tag '" + item + "' is not key=value");
        row.tags[item.substr(0, eq)] = item.substr(eq + 1);
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("manifest '" + path.string() + "' has no rows");
  return rows;
}

std::vector<LabeledPair> load_pairs(const std::vector<ManifestRow>& rows, bool require_mos, int jobs) {
  std::vector<std::optional<LabeledPair>> loaded(rows.size());
  std::vector<std::string> errors(rows.size());
  parallel_for(rows.size(), jobs, [&](std::size_t i) {
    try {
      const auto& row = rows[i];
      if (require_mos && !row.mos) throw ArgumentError("mos is required");
      loaded[i] = LabeledPair{load_image(row.ref_path), load_image(row.test_path), row.mos.value_or(0.0),
                              row.content_id};
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!errors[i].empty()) throw IoError("manifest row " + std::to_string(i + 1) + ": " + errors[i]);
  }
  std::vector<LabeledPair> out;
  out.reserve(rows.size());
  for (auto& p : loaded) out.push_back(std::move(*p));
  return out;
}

namespace {

struct Common {
  std::string mode = "block";
  std::uint64_t seed = 0;
  bool seed_given = false;
  int jobs = 1;
  ExtractionConfig cfg;
};

void add_extraction_flags(CLI::App* cmd, Common& c) {
  cmd->add_option("--mode", c.mode, "feature extraction mode")->check(CLI::IsMember({"full", "block"}));
  cmd->add_option("--svd-block", c.cfg.svd_block, "SVD block size in block mode");
  cmd->add_option("--hist-block", c.cfg.hist_block, "CoV block size");
  cmd->add_option("--hist-region", c.cfg.hist_kl_region, "KL region size in block mode");
  cmd->add_option("--bins-full", c.cfg.n_bins_full, "histogram bins in full-frame mode");
  cmd->add_option("--bins-block", c.cfg.n_bins_block, "histogram bins in block mode");
}

void add_seed_flag(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "random seed (falls back to SSQP_SEED)");
}

void add_jobs_flag(CLI::App* cmd, Common& c) {
  cmd->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
}

std::uint64_t resolve_seed(const Common& c, const CLI::App* cmd) {
  if (cmd->count("--seed") > 0) return c.seed;
  if (const char* env = std::getenv("SSQP_SEED"); env != nullptr && *env != '\0') {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string_view(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw ArgumentError("SSQP_SEED must be a non-negative integer");
  }
  return 0;
}

ExtractionConfig resolve_config(Common& c) {
  c.cfg.mode = parse_mode(c.mode);
  c.cfg.validate();
  return c.cfg;
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    write_text(path, text);
  }
}

TrainingSet extract_all(const std::vector<LabeledPair>& pairs, const ExtractionConfig& cfg, int jobs) {
  TrainingSet set;
  set.rows.resize(pairs.size());
  std::vector<std::string> errors(pairs.size());
  parallel_for(pairs.size(), jobs, [&](std::size_t i) {
    try {
      set.rows[i] = {extract_features(pairs[i].ref, pairs[i].test, cfg), pairs[i].mos, pairs[i].content_id};
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!errors[i].empty()) throw ArgumentError("manifest row " + std::to_string(i + 1) + ": " + errors[i]);
  }
  return set;
}

std::string features_csv(const std::vector<ManifestRow>& rows, const TrainingSet& set) {
  std::vector<std::string> header{"content_id", "test_path", "mos"};
  for (const auto& n : FeatureGroupSet::column_names()) header.push_back(n);
  std::string text = join_csv(header) + "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<std::string> fields{rows[i].content_id, rows[i].test_path.string(),
                                    rows[i].mos ? format_real(*rows[i].mos) : ""};
    for (double v : set.rows[i].features.values()) fields.push_back(format_real(v));
    text += join_csv(fields) + "\n";
  }
  return text;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Full-reference image quality prediction from SVD and histogram features", "ssqp"};
  app.require_subcommand(1);

  Common c;
  std::string manifest;
  std::string out_path;
  std::string model_path;
  std::string stacking = "in_sample";
  int trials = 50;
  double frac_train = 0.8;
  std::string per_trial_path;
  std::string sweep_path;
  int sweep_folds = 5;
  std::string pc_path;
  int assessors = 0;
  double scale = 0.0;

  auto* extract = app.add_subcommand("extract", "compute the 20 features for every manifest row");
  extract->add_option("manifest", manifest, "dataset manifest CSV")->required()->check(CLI::ExistingFile);
  extract->add_option("-o,--out", out_path, "output CSV (stdout when omitted)");
  add_extraction_flags(extract, c);
  add_jobs_flag(extract, c);

  auto* train = app.add_subcommand("train", "train the three-stage SVR model");
  train->add_option("manifest", manifest, "dataset manifest CSV with mos")->required()->check(CLI::ExistingFile);
  train->add_option("-m,--model", model_path, "model file to write")->required();
  train->add_option("--stacking", stacking, "stage-II/III training inputs")
      ->check(CLI::IsMember({"in_sample", "out_of_fold"}));
  add_extraction_flags(train, c);
  add_seed_flag(train, c);
  add_jobs_flag(train, c);

  auto* score = app.add_subcommand("score", "predict quality with a trained model, alongside PSNR and SSIM");
  score->add_option("-m,--model", model_path, "trained model file")->required()->check(CLI::ExistingFile);
  score->add_option("manifest", manifest, "dataset manifest CSV")->required()->check(CLI::ExistingFile);
  score->add_option("-o,--out", out_path, "output CSV (stdout when omitted)");
  add_jobs_flag(score, c);

  auto* evaluate = app.add_subcommand("evaluate", "content-split train/test evaluation");
  evaluate->add_option("manifest", manifest, "dataset manifest CSV with mos")->required()->check(CLI::ExistingFile);
  evaluate->add_option("-o,--out", out_path, "report CSV (stdout when omitted)");
  evaluate->add_option("--trials", trials, "number of random splits")->check(CLI::PositiveNumber);
  evaluate->add_option("--frac-train", frac_train, "fraction of contents used for training")
      ->check(CLI::Range(0.0, 1.0));
  evaluate->add_option("--per-trial", per_trial_path, "also write per-trial metrics to this CSV");
  evaluate->add_option("--block-sweep", sweep_path, "also run the SVD block-size sweep and write its CSV");
  evaluate->add_option("--sweep-folds", sweep_folds, "content folds for the block-size sweep")
      ->check(CLI::Range(2, 1000));
  evaluate->add_option("--stacking", stacking, "stage-II/III training inputs")
      ->check(CLI::IsMember({"in_sample", "out_of_fold"}));
  add_extraction_flags(evaluate, c);
  add_seed_flag(evaluate, c);
  add_jobs_flag(evaluate, c);

  auto* aggregate_pc = app.add_subcommand("aggregate-pc", "turn pairwise-comparison counts into quality scores");
  aggregate_pc->add_option("input", pc_path, "CSV with i,j,wins_ij,wins_ji,ties")->required()->check(CLI::ExistingFile);
  aggregate_pc->add_option("-o,--out", out_path, "output CSV (stdout when omitted)");
  aggregate_pc->add_option("--assessors", assessors, "assessor count (default: largest per-pair total)")
      ->check(CLI::PositiveNumber);
  aggregate_pc->add_option("--scale", scale, "counts MOS for an item that wins everything")
      ->check(CLI::PositiveNumber);

  auto* inspect = app.add_subcommand("inspect", "print the structure of a trained model");
  inspect->add_option("model", model_path, "trained model file")->required()->check(CLI::ExistingFile);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "ssqp: " << e.what() << "\n";
    if (const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front()) {
      err << "run '" << (sub == &app ? "ssqp" : "ssqp " + sub->get_name()) << " --help' for usage\n";
    }
    return 2;
  }

  const CLI::App* active = app.get_subcommands().front();
  try {
    if (active == extract) {
      const auto cfg = resolve_config(c);
      const auto rows = read_manifest(manifest);
      const auto set = extract_all(load_pairs(rows, false, c.jobs), cfg, c.jobs);
      emit(out_path, features_csv(rows, set), out);
    } else if (active == train) {
      const auto cfg = resolve_config(c);
      const auto set = extract_all(load_pairs(read_manifest(manifest), true, c.jobs), cfg, c.jobs);
      BoostOptions options;
      options.stacking = parse_stacking(stacking);
      options.jobs = c.jobs;
      save_model(train_ssqp(set, cfg, options, resolve_seed(c, train)), model_path);
    } else if (active == score) {
      const SsqpModel model = load_model(model_path);
      const auto rows = read_manifest(manifest);
      const auto pairs = load_pairs(rows, false, c.jobs);
      std::vector<std::array<double, 3>> values(pairs.size());
      std::vector<std::string> errors(pairs.size());
      parallel_for(pairs.size(), c.jobs, [&](std::size_t i) {
        try {
          values[i] = {predict_ssqp(model, pairs[i].ref, pairs[i].test),
                       capped_psnr(psnr(pairs[i].ref, pairs[i].test)), ssim(pairs[i].ref, pairs[i].test)};
        } catch (const std::exception& e) {
          errors[i] = e.what();
        }
      });
      std::string text = join_csv({"content_id", "ref_path", "test_path", "mos", "ssqp", "psnr", "ssim"}) + "\n";
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!errors[i].empty()) throw ArgumentError("manifest row " + std::to_string(i + 1) + ": " + errors[i]);
        text += join_csv({rows[i].content_id, rows[i].ref_path.string(), rows[i].test_path.string(),
                          rows[i].mos ? format_real(*rows[i].mos) : "", format_real(values[i][0]),
                          format_real(values[i][1]), format_real(values[i][2])}) +
                "\n";
      }
      emit(out_path, text, out);
    } else if (active == evaluate) {
      const auto cfg = resolve_config(c);
      const std::uint64_t seed = resolve_seed(c, evaluate);
      const auto pairs = load_pairs(read_manifest(manifest), true, c.jobs);
      SplitProtocolOptions options;
      options.frac_train = frac_train;
      options.n_trials = trials;
      options.boost.stacking = parse_stacking(stacking);
      options.jobs = c.jobs;
      const EvalReport report = split_protocol(extract_all(pairs, cfg, c.jobs), cfg, options, seed);
      emit(out_path, report_csv(report), out);
      if (!out_path.empty() && out_path != "-") out << report_table(report);
      if (!per_trial_path.empty()) write_text(per_trial_path, per_trial_csv(report));
      if (!sweep_path.empty()) {
        std::vector<ExtractionConfig> configs;
        for (Eigen::Index b : {5, 10, 20}) {
          ExtractionConfig sc = cfg;
          sc.mode = ExtractionMode::BlockAverage;
          sc.svd_block = b;
          configs.push_back(sc);
        }
        BoostOptions boost = options.boost;
        boost.jobs = c.jobs;
        const auto rows = block_size_sweep(pairs, configs, boost, sweep_folds, seed);
        write_text(sweep_path, sweep_csv(rows));
        out << sweep_table(rows);
      }
    } else if (active == aggregate_pc) {
      const auto p = read_preference_csv(pc_path, assessors > 0 ? std::optional<int>(assessors) : std::nullopt);
      const auto agg = aggregate(p, scale > 0.0 ? std::optional<double>(scale) : std::nullopt);
      for (const auto& w : agg.warnings) err << "ssqp aggregate-pc: warning: " << w << "\n";
      emit(out_path, aggregated_csv(agg), out);
    } else if (active == inspect) {
      out << describe_model(load_model(model_path));
    }
  } catch (const std::exception& e) {
    err << "ssqp " << active->get_name() << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace ssqp::cli

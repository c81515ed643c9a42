#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "heloc/ast_json.hpp"
#include "heloc/checkpoint.hpp"
#include "heloc/config.hpp"
#include "heloc/demo_parser.hpp"
#include "heloc/downstream.hpp"
#include "heloc/error.hpp"
#include "heloc/hcl.hpp"
#include "heloc/synth.hpp"

namespace fs = std::filesystem;

namespace heloc::cli {
namespace {

/// Bad or unreadable user input; maps to kInputError.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Inputs that are well-formed but do not fit the model; maps to kMismatch.
class MismatchError : public Error {
 public:
  using Error::Error;
};

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << contents;
    if (!out.flush()) throw InputError("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

bool is_interchange(const fs::path& p) { return p.extension() == ".jsonl"; }

/// Demo sources (.hl) and interchange files (.jsonl) below `dir`, sorted.
std::vector<fs::path> list_corpus(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InputError(dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension();
    if (ext == ".hl" || ext == ".jsonl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InputError("no .hl or .jsonl files under " + dir.string());
  return files;
}

AstGraph load_tree(const fs::path& path, const TreeCaps& caps) {
  try {
    if (is_interchange(path)) {
      std::ifstream in(path);
      if (!in) throw InputError("cannot read file");
      return load_ast_json(in, caps);
    }
    return parse_demo_source(read_file(path), caps);
  } catch (const Error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(line);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

/// Rows of a comma-separated file. A first row starting with `header_key` is
/// skipped. Relative paths in `path_columns` resolve against the file's folder.
std::vector<std::vector<std::string>> read_csv(const fs::path& file, std::size_t min_cols,
                                               const std::string& header_key,
                                               std::initializer_list<std::size_t> path_columns) {
  std::istringstream in(read_file(file));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty() || trim(line)[0] == '#') continue;
    auto cols = split(line, ',');
    if (rows.empty() && line_no == 1 && !cols.empty() && cols[0] == header_key) continue;
    if (cols.size() < min_cols)
      throw InputError(file.string() + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(min_cols) + " columns");
    for (std::size_t c : path_columns) {
      const fs::path p(cols[c]);
      if (p.is_relative()) cols[c] = (file.parent_path() / p).lexically_normal().string();
    }
    rows.push_back(std::move(cols));
  }
  if (rows.empty()) throw InputError(file.string() + " has no data rows");
  return rows;
}

/// Flat `key = value` lines; `#` starts a comment.
void apply_config_file(TrainConfig& cfg, const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    try {
      apply_setting(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const DomainError& e) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::string config_text(const std::vector<std::pair<std::string, std::string>>& entries) {
  std::string text;
  for (const auto& [k, v] : entries) text += k + "=" + v + "\n";
  return text;
}

/// Options shared by commands that build a TrainConfig.
struct ConfigOptions {
  std::string profile = "desk";
  std::string config_file;
  std::vector<std::string> settings;
  std::map<std::string, std::string> direct;
  std::optional<std::uint64_t> seed;
};

void add_config_options(CLI::App* cmd, ConfigOptions& o) {
  cmd->add_option("--profile", o.profile, "Base settings: desk (small) or full (full scale)")
      ->check(CLI::IsMember({"desk", "full"}));
  cmd->add_option("--config", o.config_file, "File of key=value settings")->check(CLI::ExistingFile);
  cmd->add_option("--set", o.settings, "Extra key=value setting (repeatable)");
  cmd->add_option("--seed", o.seed, "Random seed");
  // One flag per config field, spelled with dashes.
  for (const auto& [key, value] : describe(TrainConfig{})) {
    if (key == "seed") continue;
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (value == "true" || value == "false") {
      cmd->add_flag_callback(flag, [&o, k = key] { o.direct[k] = "true"; }, "Set " + key);
    } else {
      cmd->add_option_function<std::string>(flag, [&o, k = key](const std::string& v) { o.direct[k] = v; },
                                            "Override " + key);
    }
  }
}

TrainConfig resolve_config(const ConfigOptions& o) {
  TrainConfig cfg = o.profile == "full" ? TrainConfig{} : TrainConfig::desk();
  if (!o.config_file.empty()) apply_config_file(cfg, o.config_file);
  try {
    for (const std::string& s : o.settings) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw InputError("--set expects key=value, got '" + s + "'");
      apply_setting(cfg, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
    }
    for (const auto& [k, v] : o.direct) apply_setting(cfg, k, v);
    if (o.seed) cfg.seed = *o.seed;
    validate(cfg);
  } catch (const DomainError& e) {
    throw InputError(e.what());
  }
  return cfg;
}

// ---- parse -----------------------------------------------------------------

struct ParseOptions {
  std::vector<std::string> inputs;
  std::string out_dir;
  TreeCaps caps;
};

int cmd_parse(const ParseOptions& o, std::ostream& out) {
  std::vector<fs::path> files;
  for (const std::string& in : o.inputs) {
    if (fs::is_directory(in)) {
      for (auto& f : list_corpus(in)) files.push_back(f);
    } else if (fs::is_regular_file(in)) {
      files.emplace_back(in);
    } else {
      throw InputError("no such input: " + in);
    }
  }
  std::string stats = "file,N,depth,M\n";
  std::set<std::string> written;
  std::vector<std::pair<fs::path, std::string>> outputs;
  for (const fs::path& f : files) {
    const AstGraph g = load_tree(f, o.caps);
    std::string stem = f.filename().string();
    stem = stem.substr(0, stem.find('.'));
    const std::string name = stem + ".ast.jsonl";
    if (!written.insert(name).second) throw InputError("two inputs map to " + name);
    std::ostringstream json;
    save_ast_json(json, g);
    outputs.emplace_back(fs::path(o.out_dir) / name, json.str());
    stats += f.string() + "," + std::to_string(g.size()) + "," + std::to_string(g.depth()) + "," +
             std::to_string(g.paths().size()) + "\n";
  }
  for (const auto& [path, text] : outputs) write_atomic(path, text);
  write_atomic(fs::path(o.out_dir) / "stats.csv", stats);
  write_atomic(fs::path(o.out_dir) / "effective_config.txt",
               config_text({{"command", "parse"},
                            {"max_depth", std::to_string(o.caps.max_depth)},
                            {"max_paths", std::to_string(o.caps.max_paths)},
                            {"max_nodes", std::to_string(o.caps.max_nodes)}}));
  out << "parsed " << files.size() << " file(s) into " << o.out_dir << "\n";
  return kOk;
}

// ---- pretrain --------------------------------------------------------------

std::vector<PreparedGraph> load_corpus(const std::vector<fs::path>& files, const TrainConfig& cfg) {
  std::vector<PreparedGraph> corpus;
  corpus.reserve(files.size());
  for (const fs::path& f : files) {
    try {
      corpus.push_back(PreparedGraph::make(load_tree(f, cfg.caps()), cfg));
    } catch (const CapError& e) {
      throw InputError(f.string() + ": " + e.what());
    }
  }
  return corpus;
}

int cmd_pretrain(const std::string& corpus_dir, const ConfigOptions& co, const std::string& out_dir,
                 std::size_t log_every, std::ostream& out) {
  const TrainConfig cfg = resolve_config(co);
  const auto corpus = load_corpus(list_corpus(corpus_dir), cfg);
  std::string log = "step,loss,l_h,l_t,theta_p,tau_p\n";
  const PretrainResult result = pretrain(corpus, cfg, [&](const TrainLogRow& r) {
    log += std::to_string(r.step) + "," + fmt(r.loss) + "," + fmt(r.l_h) + "," + fmt(r.l_t) + "," +
           fmt(r.theta_p) + "," + fmt(r.tau_p) + "\n";
    if (log_every > 0 && r.step % log_every == 0) out << "step " << r.step << " loss " << r.loss << "\n";
  });
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  save_checkpoint(make_checkpoint(result), dir / "checkpoint.helc");
  write_atomic(dir / "train_log.csv", log);
  write_atomic(dir / "effective_config.txt", config_text(describe(cfg)));
  out << "trained " << cfg.steps << " step(s) on " << corpus.size() << " tree(s); wrote "
      << (dir / "checkpoint.helc").string() << "\n";
  return kOk;
}

// ---- apply -----------------------------------------------------------------

struct Model {
  TrainConfig config;
  HclParams params;
};

/// The checkpoint's params. A --config or override must agree with every
/// setting that shapes the model.
Model load_model(const std::string& checkpoint, const ConfigOptions& co, bool has_overrides) {
  Checkpoint ckpt;
  try {
    ckpt = load_checkpoint(checkpoint);
  } catch (const FormatError& e) {
    throw InputError(e.what());
  }
  Model m{ckpt.config, params_from_checkpoint(ckpt)};
  if (has_overrides) {
    TrainConfig requested = ckpt.config;
    if (!co.config_file.empty()) apply_config_file(requested, co.config_file);
    try {
      for (const std::string& s : co.settings) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw InputError("--set expects key=value, got '" + s + "'");
        apply_setting(requested, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
      }
      for (const auto& [k, v] : co.direct) apply_setting(requested, k, v);
    } catch (const DomainError& e) {
      throw InputError(e.what());
    }
    const TrainConfig& have = ckpt.config;
    if (requested.dim != have.dim || requested.layers != have.layers || requested.max_depth != have.max_depth ||
        requested.ngram_sizes != have.ngram_sizes || requested.hash_seed != have.hash_seed ||
        requested.activation != have.activation || requested.no_self_attention != have.no_self_attention ||
        requested.no_residual != have.no_residual)
      throw MismatchError("configuration does not match the checkpoint's model");
    m.config.max_paths = requested.max_paths;
    m.config.max_nodes = requested.max_nodes;
  }
  return m;
}

PreparedGraph prepare(const fs::path& file, const TrainConfig& cfg) {
  try {
    return PreparedGraph::make(load_tree(file, cfg.caps()), cfg);
  } catch (const CapError& e) {
    throw InputError(file.string() + ": " + e.what());
  }
}

std::vector<PreparedGraph> prepare_all(const std::vector<std::string>& files, const TrainConfig& cfg) {
  std::vector<PreparedGraph> out;
  out.reserve(files.size());
  for (const std::string& f : files) out.push_back(prepare(f, cfg));
  return out;
}

struct ApplyOptions {
  std::string checkpoint;
  std::string out_dir;
  std::vector<std::string> inputs;
  std::string train, validation, test, pairs, calibrate;
  std::size_t k = 2;
  std::uint64_t seed = 0;
  FineTuneOptions tune;
};

std::string vector_row(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += "," + fmt(x);
  return s;
}

int apply_embed(const Model& m, const ApplyOptions& o) {
  if (o.inputs.empty()) throw InputError("embed needs at least one input file");
  std::string csv = "path";
  for (std::size_t c = 0; c < m.config.dim; ++c) csv += ",r" + std::to_string(c);
  csv += "\n";
  for (const std::string& f : o.inputs) {
    const PreparedGraph g = prepare(f, m.config);
    csv += f + vector_row(embed_graph(g, m.params.encoder, m.config).r) + "\n";
  }
  write_atomic(fs::path(o.out_dir) / "embeddings.csv", csv);
  return kOk;
}

int apply_project(const Model& m, const ApplyOptions& o) {
  if (o.inputs.size() != 1) throw InputError("project takes exactly one input file");
  const PreparedGraph g = prepare(o.inputs[0], m.config);
  const Tensor2 pcs = project_2d(encode_graph(g, m.params.encoder, m.config));
  std::string csv = "node_id,level,pc1,pc2\n";
  for (std::size_t i = 0; i < g.graph.size(); ++i)
    csv += std::to_string(i) + "," + std::to_string(g.graph.levels()[i]) + "," + fmt(pcs(i, 0)) + "," +
           fmt(pcs(i, 1)) + "\n";
  write_atomic(fs::path(o.out_dir) / "projection.csv", csv);
  return kOk;
}

struct LabeledSet {
  std::vector<std::string> paths;
  std::vector<std::string> labels;
};

LabeledSet read_labeled(const fs::path& file, bool require_labels) {
  LabeledSet s;
  for (auto& row : read_csv(file, require_labels ? 2 : 1, "path", {0})) {
    s.paths.push_back(row[0]);
    s.labels.push_back(row.size() > 1 ? row[1] : std::string());
  }
  return s;
}

int apply_classify(const Model& m, const ApplyOptions& o, std::ostream& out) {
  if (o.train.empty() || o.test.empty()) throw InputError("classify needs --train and --test");
  const LabeledSet train = read_labeled(o.train, true);
  const LabeledSet test = read_labeled(o.test, false);
  LabeledSet validation;
  if (!o.validation.empty()) validation = read_labeled(o.validation, true);

  std::vector<std::string> classes(train.labels.begin(), train.labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.size() < 2) throw InputError("classify needs at least two distinct training labels");
  auto index_of = [&](const std::string& label) -> std::size_t {
    const auto it = std::lower_bound(classes.begin(), classes.end(), label);
    if (it == classes.end() || *it != label) throw InputError("label '" + label + "' does not occur in training");
    return static_cast<std::size_t>(it - classes.begin());
  };

  const auto train_graphs = prepare_all(train.paths, m.config);
  const auto val_graphs = prepare_all(validation.paths, m.config);
  std::vector<LabeledGraph> train_set, val_set;
  for (std::size_t i = 0; i < train_graphs.size(); ++i) train_set.push_back({&train_graphs[i], index_of(train.labels[i])});
  for (std::size_t i = 0; i < val_graphs.size(); ++i) val_set.push_back({&val_graphs[i], index_of(validation.labels[i])});

  FineTuneOptions tune = o.tune;
  tune.seed = o.seed;
  const FineTuneResult tuned = fine_tune(m.params.encoder, m.config, train_set, val_set, classes.size(), tune);

  std::string csv = "path,label,predicted\n";
  std::size_t labeled = 0, correct = 0;
  for (std::size_t i = 0; i < test.paths.size(); ++i) {
    const PreparedGraph g = prepare(test.paths[i], m.config);
    const std::size_t predicted = classify_predict(embed_graph(g, tuned.encoder, m.config), tuned.head);
    csv += test.paths[i] + "," + test.labels[i] + "," + classes[predicted] + "\n";
    if (!test.labels[i].empty()) {
      ++labeled;
      if (test.labels[i] == classes[predicted]) ++correct;
    }
  }
  write_atomic(fs::path(o.out_dir) / "predictions.csv", csv);
  std::string metrics = "metric,value\n";
  metrics += "best_epoch," + std::to_string(tuned.best_epoch) + "\n";
  if (labeled > 0) {
    const double acc = static_cast<double>(correct) / static_cast<double>(labeled);
    metrics += "accuracy," + fmt(acc) + "\n";
    out << "accuracy " << acc << " on " << labeled << " labeled test snippet(s)\n";
  }
  write_atomic(fs::path(o.out_dir) / "metrics.csv", metrics);
  return kOk;
}

struct PairSet {
  std::vector<std::array<std::string, 2>> paths;
  std::vector<int> y;
};

PairSet read_pairs(const fs::path& file) {
  PairSet s;
  for (auto& row : read_csv(file, 3, "path1", {0, 1})) {
    int y = 0;
    if (row[2] == "1") y = 1;
    else if (row[2] == "-1") y = -1;
    else throw InputError(file.string() + ": y must be 1 or -1, got '" + row[2] + "'");
    s.paths.push_back({row[0], row[1]});
    s.y.push_back(y);
  }
  return s;
}

/// Pooled vectors, computed once per distinct file.
class VectorCache {
 public:
  explicit VectorCache(const Model& m) : m_(m) {}
  const std::vector<double>& get(const std::string& path) {
    auto it = cache_.find(path);
    if (it == cache_.end())
      it = cache_.emplace(path, embed_graph(prepare(path, m_.config), m_.params.encoder, m_.config).r).first;
    return it->second;
  }

 private:
  const Model& m_;
  std::map<std::string, std::vector<double>> cache_;
};

int apply_clone(const Model& m, const ApplyOptions& o, std::ostream& out) {
  if (o.pairs.empty()) throw InputError("clone needs --pairs");
  VectorCache vectors(m);
  std::optional<CloneCalibration> calibration;
  if (!o.calibrate.empty()) {
    const PairSet fit = read_pairs(o.calibrate);
    std::vector<double> p;
    for (const auto& pr : fit.paths) p.push_back(relatedness(vectors.get(pr[0]), vectors.get(pr[1])));
    calibration = CloneCalibration::fit(p, fit.y);
  }
  const PairSet pairs = read_pairs(o.pairs);
  std::string csv = "path1,path2,y,p,is_clone\n";
  std::vector<bool> predicted, truth;
  for (std::size_t i = 0; i < pairs.paths.size(); ++i) {
    const auto& a = vectors.get(pairs.paths[i][0]);
    const auto& b = vectors.get(pairs.paths[i][1]);
    const CloneVerdict v = calibration ? clone_predict(a, b, *calibration) : clone_predict(a, b);
    csv += pairs.paths[i][0] + "," + pairs.paths[i][1] + "," + std::to_string(pairs.y[i]) + "," + fmt(v.p) + "," +
           (v.is_clone ? "1" : "0") + "\n";
    predicted.push_back(v.is_clone);
    truth.push_back(pairs.y[i] == 1);
  }
  const PrecisionRecall pr = prf1(predicted, truth);
  write_atomic(fs::path(o.out_dir) / "predictions.csv", csv);
  std::string metrics = "metric,value\nprecision," + fmt(pr.precision) + "\nrecall," + fmt(pr.recall) +
                        "\nf1," + fmt(pr.f1) + "\n";
  if (calibration)
    metrics += "calibration_scale," + fmt(calibration->scale) + "\ncalibration_offset," +
               fmt(calibration->offset) + "\n";
  write_atomic(fs::path(o.out_dir) / "metrics.csv", metrics);
  out << "clone F1 " << pr.f1 << " over " << pairs.paths.size() << " pair(s)\n";
  return kOk;
}

int apply_cluster(const Model& m, const ApplyOptions& o, std::ostream& out) {
  LabeledSet set;
  if (!o.test.empty()) set = read_labeled(o.test, false);
  for (const std::string& f : o.inputs) {
    set.paths.push_back(f);
    set.labels.emplace_back();
  }
  if (set.paths.empty()) throw InputError("cluster needs input files or --input-csv");
  if (o.k == 0 || o.k > set.paths.size())
    throw MismatchError("k=" + std::to_string(o.k) + " but only " + std::to_string(set.paths.size()) +
                        " snippet(s) were given");
  VectorCache vectors(m);
  std::vector<std::vector<double>> points;
  for (const std::string& p : set.paths) points.push_back(vectors.get(p));
  const KMeansResult km = kmeans(points, o.k, o.seed);

  std::string csv = "path,cluster\n";
  for (std::size_t i = 0; i < set.paths.size(); ++i) csv += set.paths[i] + "," + std::to_string(km.assignments[i]) + "\n";
  write_atomic(fs::path(o.out_dir) / "assignments.csv", csv);

  std::string metrics = "metric,value\ninertia," + fmt(km.inertia()) + "\niterations," +
                        std::to_string(km.iterations) + "\n";
  const bool all_labeled =
      std::all_of(set.labels.begin(), set.labels.end(), [](const std::string& l) { return !l.empty(); });
  if (all_labeled) {
    std::map<std::string, int> ids;
    std::vector<int> truth, predicted;
    for (std::size_t i = 0; i < set.labels.size(); ++i) {
      truth.push_back(ids.emplace(set.labels[i], static_cast<int>(ids.size())).first->second);
      predicted.push_back(static_cast<int>(km.assignments[i]));
    }
    const double score = ari(predicted, truth);
    metrics += "ari," + fmt(score) + "\n";
    out << "ARI " << score << "\n";
  }
  write_atomic(fs::path(o.out_dir) / "metrics.csv", metrics);
  return kOk;
}

// ---- synth -----------------------------------------------------------------

struct SynthOptions {
  std::string family = "mixed";
  std::size_t count = 10;
  int max_depth = 6;
  std::uint64_t seed = 0;
  std::string out_dir;
};

int cmd_synth(const SynthOptions& o, std::ostream& out) {
  ProgramFamily family;
  try {
    family = parse_family(o.family);
  } catch (const DomainError& e) {
    throw InputError(e.what());
  }
  if (o.max_depth < 4) throw InputError("--max-depth must be at least 4");
  Rng rng(o.seed);
  for (std::size_t i = 0; i < o.count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%s_%04zu.hl", o.family.c_str(), i);
    write_atomic(fs::path(o.out_dir) / name, generate_program(family, rng, o.max_depth));
  }
  write_atomic(fs::path(o.out_dir) / "effective_config.txt",
               config_text({{"command", "synth"},
                            {"family", o.family},
                            {"count", std::to_string(o.count)},
                            {"max_depth", std::to_string(o.max_depth)},
                            {"seed", std::to_string(o.seed)}}));
  out << "wrote " << o.count << " program(s) to " << o.out_dir << "\n";
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical AST pretraining and downstream tasks"};
  app.name("heloc");
  app.require_subcommand(1);

  ParseOptions parse_opts;
  auto* parse_cmd = app.add_subcommand("parse", "Parse sources into interchange files with a stats report");
  parse_cmd->add_option("inputs", parse_opts.inputs, "Source or interchange files, or directories")->required();
  parse_cmd->add_option("--out-dir", parse_opts.out_dir, "Output directory")->required();
  parse_cmd->add_option("--max-depth", parse_opts.caps.max_depth, "Depth cap");
  parse_cmd->add_option("--max-paths", parse_opts.caps.max_paths, "Path cap");
  parse_cmd->add_option("--max-nodes", parse_opts.caps.max_nodes, "Node cap");

  ConfigOptions pre_cfg;
  std::string corpus_dir, pre_out;
  std::size_t log_every = 0;
  auto* pre_cmd = app.add_subcommand("pretrain", "Pretrain the encoder on a corpus directory");
  pre_cmd->add_option("corpus", corpus_dir, "Directory of .hl or .jsonl trees")->required();
  pre_cmd->add_option("--out-dir", pre_out, "Output directory")->required();
  pre_cmd->add_option("--log-every", log_every, "Print the loss every N steps (0 = never)");
  add_config_options(pre_cmd, pre_cfg);

  ApplyOptions apply_opts;
  ConfigOptions apply_cfg;
  std::string task;
  auto* apply_cmd = app.add_subcommand("apply", "Use a pretrained checkpoint");
  apply_cmd->add_option("task", task, "embed | classify | clone | cluster | project")
      ->required()
      ->check(CLI::IsMember({"embed", "classify", "clone", "cluster", "project"}));
  apply_cmd->add_option("inputs", apply_opts.inputs, "Input files (embed, cluster, project)");
  apply_cmd->add_option("--checkpoint", apply_opts.checkpoint, "Checkpoint file")->required();
  apply_cmd->add_option("--out-dir", apply_opts.out_dir, "Output directory")->required();
  apply_cmd->add_option("--train", apply_opts.train, "classify: CSV path,label");
  apply_cmd->add_option("--validation", apply_opts.validation, "classify: CSV path,label for early stopping");
  apply_cmd->add_option("--test", apply_opts.test, "classify: CSV path[,label] to predict");
  apply_cmd->add_option("--input-csv", apply_opts.test, "cluster: CSV path[,label]");
  apply_cmd->add_option("--pairs", apply_opts.pairs, "clone: CSV path1,path2,y");
  apply_cmd->add_option("--calibrate", apply_opts.calibrate, "clone: CSV of pairs to fit a linear calibration on p");
  apply_cmd->add_option("--k", apply_opts.k, "cluster: number of clusters");
  apply_cmd->add_option("--epochs", apply_opts.tune.epochs, "classify: fine-tuning epochs");
  apply_cmd->add_option("--lr", apply_opts.tune.lr, "classify: fine-tuning learning rate");
  apply_cmd->add_option("--batch-size", apply_opts.tune.batch_size, "classify: snippets per update");
  apply_cmd->add_option("--patience", apply_opts.tune.patience, "classify: early-stopping patience");
  apply_cmd->add_option("--smoothing", apply_opts.tune.smoothing, "classify: label smoothing");
  apply_cmd->add_option("--seed", apply_opts.seed, "Random seed");
  apply_cmd->add_option("--config", apply_cfg.config_file, "Settings that must agree with the checkpoint")
      ->check(CLI::ExistingFile);
  apply_cmd->add_option("--set", apply_cfg.settings, "key=value that must agree with the checkpoint");

  SynthOptions synth_opts;
  auto* synth_cmd = app.add_subcommand("synth", "Generate demo-language programs");
  synth_cmd->add_option("--family", synth_opts.family, "mixed | loops | branches");
  synth_cmd->add_option("--count", synth_opts.count, "Number of programs");
  synth_cmd->add_option("--max-depth", synth_opts.max_depth, "Tree depth bound");
  synth_cmd->add_option("--seed", synth_opts.seed, "Random seed");
  synth_cmd->add_option("--out-dir", synth_opts.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kInputError;
  }

  try {
    if (*parse_cmd) return cmd_parse(parse_opts, out);
    if (*pre_cmd) return cmd_pretrain(corpus_dir, pre_cfg, pre_out, log_every, out);
    if (*synth_cmd) return cmd_synth(synth_opts, out);
    const bool overrides = !apply_cfg.config_file.empty() || !apply_cfg.settings.empty();
    const Model model = load_model(apply_opts.checkpoint, apply_cfg, overrides);
    int code = kOk;
    if (task == "embed") code = apply_embed(model, apply_opts);
    else if (task == "project") code = apply_project(model, apply_opts);
    else if (task == "classify") code = apply_classify(model, apply_opts, out);
    else if (task == "clone") code = apply_clone(model, apply_opts, out);
    else code = apply_cluster(model, apply_opts, out);
    std::vector<std::pair<std::string, std::string>> echo{{"command", "apply " + task},
                                                          {"checkpoint", apply_opts.checkpoint}};
    for (auto& kv : describe(model.config)) echo.push_back(kv);
    write_atomic(fs::path(apply_opts.out_dir) / "effective_config.txt", config_text(echo));
    return code;
  } catch (const NoSignalError& e) {
    err << "error: " << e.what() << "\n";
    return kNoSignal;
  } catch (const MismatchError& e) {
    err << "error: " << e.what() << "\n";
    return kMismatch;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << "\n";
    return kMismatch;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
}

}  // namespace heloc::cli

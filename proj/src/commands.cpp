#include "evoclass/commands.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "evoclass/errors.hpp"
#include "evoclass/metrics.hpp"
#include "evoclass/rng.hpp"
#include "evoclass/saliency.hpp"

namespace evoclass {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct PredRow {
  std::string id;
  int label = 0;
  int pred = 0;
  std::string institution;
};

std::vector<PredRow> predict_samples(const ModelParams& params,
                                     const std::vector<LabeledSample>& samples) {
  std::vector<PredRow> rows;
  rows.reserve(samples.size());
  Workspace ws;
  for (const LabeledSample& s : samples) {
    PredRow r;
    r.id = s.id;
    r.label = static_cast<int>(s.label);
    r.pred = predict(params, s.image.ptr(), ws);
    r.institution = s.institution;
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_predictions_csv(const std::vector<PredRow>& rows, const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << "sample_id,label,pred,correct\n";
  for (const PredRow& r : rows)
    os << r.id << "," << label_name(static_cast<Label>(r.label)) << ","
       << label_name(static_cast<Label>(r.pred)) << "," << (r.pred == r.label ? 1 : 0)
       << "\n";
}

json metrics_json(const MetricsReport& rep, const ConfusionMatrix& cm) {
  auto opt = [](const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
  };
  json j;
  j["accuracy"] = opt(rep.accuracy);
  j["sensitivity"] = opt(rep.sensitivity);
  j["specificity"] = opt(rep.specificity);
  j["ppv"] = opt(rep.ppv);
  j["npv"] = opt(rep.npv);
  j["f1"] = opt(rep.f1);
  j["confusion"] = {cm.tp, cm.fn, cm.fp, cm.tn};
  j["n"] = cm.total();
  return j;
}

json metrics_for_rows(const std::vector<PredRow>& rows) {
  std::vector<int> preds, labels;
  for (const PredRow& r : rows) {
    preds.push_back(r.pred);
    labels.push_back(r.label);
  }
  const ConfusionMatrix cm = confusion(preds, labels);
  return metrics_json(report(cm), cm);
}

// overall metrics plus home/outside subsets where present
json evaluation_json(const std::vector<PredRow>& rows) {
  json j = metrics_for_rows(rows);
  j["mcnemar"] = nullptr;
  std::vector<PredRow> home, outside;
  for (const PredRow& r : rows)
    (r.institution == "home" ? home : outside).push_back(r);
  if (!home.empty()) j["subsets"]["home"] = metrics_for_rows(home);
  if (!outside.empty()) j["subsets"]["outside"] = metrics_for_rows(outside);
  return j;
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << j.dump(2) << "\n";
}

std::vector<LabeledSample> take_split(std::vector<LabeledSample>& all, Split split) {
  std::vector<LabeledSample> out;
  for (LabeledSample& s : all)
    if (s.split == split) out.push_back(std::move(s));
  return out;
}

struct ResolvedData {
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> test;
  int image_size = 0;
};

ResolvedData resolve_data(const RunConfig& cfg) {
  ResolvedData d;
  if (cfg.data.source == "generate") {
    CorpusSpec spec = cfg.data.corpus;
    spec.master_seed = derive(cfg.seed, "data");
    Corpus corpus = generate_corpus(spec, cfg.workers);
    d.image_size = corpus.image_size;
    d.train = take_split(corpus.samples, Split::train);
    d.test = take_split(corpus.samples, Split::test);
  } else if (cfg.data.source == "micro") {
    auto [train, test] = micro_dataset(derive(cfg.seed, "data"));
    d.image_size = 16;
    d.train = std::move(train);
    d.test = std::move(test);
  } else {
    auto all = load_manifest(cfg.data.manifest, cfg.arch.input_size);
    d.image_size = cfg.arch.input_size;
    d.train = take_split(all, Split::train);
    d.test = take_split(all, Split::test);
  }
  if (d.train.empty() || d.test.empty())
    throw DataError("data source provides no " +
                    std::string(d.train.empty() ? "train" : "test") + " samples");
  return d;
}

struct PartialMarker {
  fs::path path;
  explicit PartialMarker(const fs::path& dir) : path(dir / ".partial") {
    std::ofstream(path).put('\n');
  }
  void done() { fs::remove(path); }
};

std::map<std::string, uint8_t> read_predictions_correct(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open predictions " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw DataError(path.string() + " is empty");
  std::map<std::string, uint8_t> out;
  int row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    if (f.size() != 4)
      throw DataError(path.string() + " row " + std::to_string(row) + ": want 4 fields");
    out[f[0]] = static_cast<uint8_t>(f[3] == "1");
  }
  if (out.empty()) throw ArgumentError(path.string() + " has no data rows");
  return out;
}

std::map<std::string, std::string> manifest_institutions(const fs::path& manifest) {
  std::ifstream is(manifest);
  if (!is) throw DataError("cannot open manifest " + manifest.string());
  std::string line;
  std::getline(is, line);
  std::map<std::string, std::string> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    if (f.size() == 5) out[f[0]] = f[3];
  }
  return out;
}

json mcnemar_json(const McNemarReport& r) {
  return json{{"b", r.b}, {"c", r.c}, {"p_exact", r.p_exact}, {"p_chi2", r.p_chi2}};
}

}  // namespace

int cmd_gen_data(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.data.source != "generate")
    throw ArgumentError("gen-data requires data.source=generate");
  const fs::path dir = cfg.output_dir;
  if (fs::exists(dir) && !fs::is_empty(dir) && !cfg.force)
    throw ArgumentError("output dir " + dir.string() +
                        " exists and is not empty (use --force to overwrite)");
  CorpusSpec spec = cfg.data.corpus;
  spec.master_seed = derive(cfg.seed, "data");
  Corpus corpus = generate_corpus(spec, cfg.workers);
  fs::create_directories(dir);
  write_corpus(corpus, dir);
  return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& method) {
  cfg.validate();
  if (method != "dne" && method != "sgd" && method != "adam")
    throw ArgumentError("method must be dne, sgd or adam");

  ResolvedData data = resolve_data(cfg);
  ArchitectureConfig arch = cfg.arch;
  if (arch.input_size != data.image_size)
    throw ArgumentError("arch.input_size (" + std::to_string(arch.input_size) +
                        ") does not match data image size (" +
                        std::to_string(data.image_size) +
                        "); set arch.input_size accordingly");

  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  PartialMarker marker(dir);

  ModelParams initial = glorot_init(arch, derive(cfg.seed, "init"));

  if (method == "dne") {
    DneConfig dcfg = cfg.dne;
    dcfg.master_seed = derive(cfg.seed, "dne");
    dcfg.workers = cfg.workers;
    DneResult res = train_dne(dcfg, std::move(initial), data.train, data.test);
    save_params(res.params, dir / "model.bin");
    write_dne_history_csv(res.history, dir / "history.csv");
    auto rows = predict_samples(res.params, data.test);
    write_predictions_csv(rows, dir / "predictions.csv");
    write_json(evaluation_json(rows), dir / "metrics.json");
  } else {
    SgdConfig scfg = cfg.sgd;
    scfg.optimizer = method == "sgd" ? SgdConfig::Optimizer::sgd
                                     : SgdConfig::Optimizer::adam;
    scfg.shuffle_seed = derive(cfg.seed, "sgd-shuffle");
    SgdResult res = train_sgd(scfg, std::move(initial), data.train, data.test);
    save_params(res.params, dir / "model.bin");
    write_sgd_history_csv(res.history, dir / "history.csv");
    auto rows = predict_samples(res.params, data.test);
    write_predictions_csv(rows, dir / "predictions.csv");
    write_json(evaluation_json(rows), dir / "metrics.json");
  }
  marker.done();
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& manifest_path,
             const std::string& out_dir, const std::string& split_filter,
             int workers) {
  (void)workers;
  if (split_filter != "train" && split_filter != "test" && split_filter != "all")
    throw ArgumentError("--split must be train, test or all");
  ModelParams params = load_params(model_path);
  auto all = load_manifest(manifest_path, params.config().input_size);
  std::vector<LabeledSample> subset;
  for (LabeledSample& s : all)
    if (split_filter == "all" || split_name(s.split) == split_filter)
      subset.push_back(std::move(s));
  if (subset.empty())
    throw DataError("no samples in split '" + split_filter + "'");

  const fs::path dir = out_dir;
  fs::create_directories(dir);
  auto rows = predict_samples(params, subset);
  write_predictions_csv(rows, dir / "predictions.csv");
  write_json(evaluation_json(rows), dir / "metrics.json");
  return 0;
}

int cmd_compare(const std::string& preds_a, const std::string& preds_b,
                const std::string& out_path, const std::string& manifest_path) {
  auto a = read_predictions_correct(preds_a);
  auto b = read_predictions_correct(preds_b);

  std::vector<std::string> only_a, only_b;
  for (const auto& [id, _] : a)
    if (!b.count(id)) only_a.push_back(id);
  for (const auto& [id, _] : b)
    if (!a.count(id)) only_b.push_back(id);
  if (!only_a.empty() || !only_b.empty()) {
    std::ostringstream os;
    os << "sample id mismatch between predictions;";
    if (!only_a.empty()) {
      os << " only in A:";
      for (const auto& id : only_a) os << " " << id;
    }
    if (!only_b.empty()) {
      os << " only in B:";
      for (const auto& id : only_b) os << " " << id;
    }
    throw ArgumentError(os.str());
  }

  std::vector<uint8_t> ca, cb;
  for (const auto& [id, v] : a) {
    ca.push_back(v);
    cb.push_back(b.at(id));
  }
  json out;
  out["overall"] = mcnemar_json(mcnemar_report(ca, cb));

  if (!manifest_path.empty()) {
    auto inst = manifest_institutions(manifest_path);
    std::vector<uint8_t> oa, ob;
    for (const auto& [id, v] : a) {
      auto it = inst.find(id);
      if (it != inst.end() && it->second != "home") {
        oa.push_back(v);
        ob.push_back(b.at(id));
      }
    }
    if (!oa.empty()) out["outside"] = mcnemar_json(mcnemar_report(oa, ob));
  }
  write_json(out, out_path);
  return 0;
}

int cmd_saliency(const std::string& model_path, const std::string& manifest_path,
                 const std::vector<std::string>& sample_ids,
                 const std::string& out_dir, int patch, int stride,
                 const std::string& fill_mode, int workers) {
  if (fill_mode != "mean" && fill_mode != "zero")
    throw ArgumentError("--fill must be mean or zero");
  ModelParams params = load_params(model_path);
  auto all = load_manifest(manifest_path, params.config().input_size);

  float fill = 0.0f;
  if (fill_mode == "mean") {
    std::vector<LabeledSample> train;
    for (const LabeledSample& s : all)
      if (s.split == Split::train) train.push_back(s);
    // fall back to the whole manifest when it carries no train rows
    fill = static_cast<float>(mean_intensity(train.empty() ? all : train));
  }

  std::map<std::string, const LabeledSample*> by_id;
  for (const LabeledSample& s : all) by_id[s.id] = &s;

  const fs::path dir = out_dir;
  fs::create_directories(dir);
  for (const std::string& id : sample_ids) {
    auto it = by_id.find(id);
    if (it == by_id.end())
      throw ArgumentError("sample id '" + id + "' not present in manifest");
    const LabeledSample& s = *it->second;
    const int target = predict(params, s.image);
    SaliencyMap map = occlusion_map(params, s.image, target, patch, stride, fill,
                                    workers);
    render_heatmap(map, s.image, dir / (id + "_saliency.pgm"));
    write_grid_csv(map, dir / (id + "_grid.csv"));
  }
  return 0;
}

int cmd_report(const std::vector<std::string>& curves, const std::string& out_path) {
  if (curves.empty()) throw ArgumentError("report: no --curve label=path arguments");
  std::ofstream os(out_path);
  if (!os) throw DataError("cannot write " + out_path);
  os << "source,step,train_acc,test_acc\n";
  for (const std::string& spec : curves) {
    const size_t eq = spec.find('=');
    if (eq == std::string::npos)
      throw ArgumentError("curve '" + spec + "' is not label=path");
    const std::string label = spec.substr(0, eq);
    const std::string path = spec.substr(eq + 1);
    std::ifstream is(path);
    if (!is) throw DataError("cannot open history " + path);
    std::string line;
    if (!std::getline(is, line)) throw DataError(path + " is empty");
    std::vector<std::string> header;
    {
      std::stringstream ss(line);
      std::string tok;
      while (std::getline(ss, tok, ',')) header.push_back(tok);
    }
    auto col = [&](const std::string& name) {
      auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end())
        throw DataError(path + ": history has no '" + name + "' column");
      return static_cast<size_t>(it - header.begin());
    };
    const size_t step_col = col(header[0] == "generation" ? "generation" : "epoch");
    const size_t train_col = col("train_acc");
    const size_t test_col = col("test_acc");
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      std::vector<std::string> f;
      std::stringstream ss(line);
      std::string tok;
      while (std::getline(ss, tok, ',')) f.push_back(tok);
      os << label << "," << f[step_col] << "," << f[train_col] << "," << f[test_col]
         << "\n";
    }
  }
  return 0;
}

}  // namespace evoclass

#include "gvlad/commands.hpp"

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "gvlad/dataset_io.hpp"
#include "gvlad/evaluation.hpp"
#include "gvlad/head.hpp"
#include "gvlad/init.hpp"

namespace gvlad {

namespace {

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  if (out.empty()) throw InvalidSpec("empty list value");
  return out;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// templates from a dataset: default grouping is two templates per identity
// (first/second half of its examples); records of one media_id stay together
std::vector<std::pair<int, Template>> default_templates(const Dataset& ds) {
  std::map<int, std::vector<const ExampleRecord*>> by_id;
  for (const auto& r : ds.records) by_id[static_cast<int>(r.identity)].push_back(&r);

  std::vector<std::pair<int, Template>> out;
  for (const auto& [id, recs] : by_id) {
    std::size_t half = (recs.size() + 1) / 2;
    Template a, b;
    a.subject = b.subject = static_cast<std::uint32_t>(id);
    for (std::size_t i = 0; i < recs.size(); ++i)
      (i < half ? a : b).records.push_back(*recs[i]);
    out.push_back({id * 2, std::move(a)});
    if (!b.records.empty()) out.push_back({id * 2 + 1, std::move(b)});
  }
  return out;
}

std::vector<std::pair<int, Template>> protocol_templates(
    const Dataset& ds, const std::string& protocol_path) {
  std::map<std::uint32_t, std::vector<const ExampleRecord*>> by_media;
  for (const auto& r : ds.records) by_media[r.media_id].push_back(&r);

  std::ifstream is(protocol_path);
  if (!is) throw FormatError("cannot open protocol file " + protocol_path);
  std::vector<std::pair<int, Template>> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("protocol line " + std::to_string(lineno) + ": " + e.what());
    }
    Template t;
    int tid = j.at("template_id").get<int>();
    t.subject = j.at("subject").get<std::uint32_t>();
    for (const auto& media : j.at("media")) {
      std::uint32_t mid = media.at("media_id").get<std::uint32_t>();
      std::string kind = media.value("kind", "still");
      auto it = by_media.find(mid);
      if (it == by_media.end())
        throw FormatError("protocol line " + std::to_string(lineno) +
                          ": unknown media_id " + std::to_string(mid));
      for (const ExampleRecord* r : it->second) {
        ExampleRecord copy = *r;
        copy.source_kind =
            kind == "video" ? SourceKind::VideoFrame : SourceKind::Still;
        copy.media_id = mid;
        t.records.push_back(std::move(copy));
      }
    }
    if (t.records.empty())
      throw FormatError("protocol line " + std::to_string(lineno) + ": empty template");
    out.push_back({tid, std::move(t)});
  }
  return out;
}

int identity_count(const Dataset& ds) {
  int t = 0;
  for (const auto& r : ds.records)
    t = std::max(t, static_cast<int>(r.identity) + 1);
  return t;
}

void write_curve_csv(const std::string& path, const std::string& kind,
                     const std::vector<CurvePoint>& pts) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  os << "# kind=" << kind << "\n";
  os << "x,y\n";
  for (const auto& p : pts) os << fmt_double(p.x) << ',' << fmt_double(p.y) << '\n';
}

}  // namespace

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  if (key == "identities") corpus.identities = std::stoi(value);
  else if (key == "per_identity") corpus.per_identity = std::stoi(value);
  else if (key == "d_f") corpus.dim = std::stoi(value);
  else if (key == "spread") corpus.spread = std::stod(value);
  else if (key == "degrade_prob") corpus.degrade_prob = std::stod(value);
  else if (key == "degrade_strength") corpus.degrade_strength = std::stod(value);
  else if (key == "seed") { corpus.seed = std::stoull(value); train.seed = std::stoull(value); }
  else if (key == "k") k = std::stoi(value);
  else if (key == "g") g = std::stoi(value);
  else if (key == "d") d = std::stoi(value);
  else if (key == "alpha") alpha = std::stod(value);
  else if (key == "set_size") train.set_size = std::stoi(value);
  else if (key == "batch_sets") train.batch_sets = std::stoi(value);
  else if (key == "base_lr") train.base_lr = std::stod(value);
  else if (key == "assign_lr") train.assign_lr = std::stod(value);
  else if (key == "classifier_lr") train.classifier_lr = std::stod(value);
  else if (key == "momentum") train.momentum = std::stod(value);
  else if (key == "weight_decay") train.weight_decay = std::stod(value);
  else if (key == "neg_classes") train.neg_classes = std::stoi(value);
  else if (key == "lr_drop_factor") train.lr_drop_factor = std::stod(value);
  else if (key == "plateau_patience") train.plateau_patience = std::stoi(value);
  else if (key == "stage2_epochs") train.stage2_epochs = std::stoi(value);
  else if (key == "stage3_epochs") train.stage3_epochs = std::stoi(value);
  else if (key == "val_fraction") train.val_fraction = std::stod(value);
  else if (key == "grid_k") grid_k = parse_int_list(value);
  else if (key == "grid_g") grid_g = parse_int_list(value);
  else if (key == "grid_set_size") grid_set_size = parse_int_list(value);
  else if (key == "grid_d") grid_d = parse_int_list(value);
  else throw InvalidSpec("unknown config key '" + key + "'");
}

void ExperimentConfig::load_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open config file " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    // trim
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError("config line " + std::to_string(lineno) + ": expected key=value");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    auto trim = [](std::string& s) {
      auto a = s.find_first_not_of(" \t");
      auto b = s.find_last_not_of(" \t");
      s = a == std::string::npos ? "" : s.substr(a, b - a + 1);
    };
    trim(key);
    trim(value);
    set(key, value);
  }
}

void cmd_gen(const ExperimentConfig& cfg, const std::string& out_path, bool jsonl) {
  auto records = generate_corpus(cfg.corpus);
  write_dataset(out_path, cfg.corpus.dim, records,
                jsonl ? DatasetFormat::Jsonl : DatasetFormat::Binary);
}

void cmd_init(const std::string& dataset_path, const ExperimentConfig& cfg,
              const std::string& out_model) {
  Dataset ds = read_dataset(dataset_path);
  if (ds.records.empty()) throw TooFewPoints("dataset has no records");

  // the quality split is data preparation, done here at the wiring layer;
  // the init/training operations only ever see anonymous descriptor lists
  std::vector<Eigen::VectorXd> clean, degraded;
  for (const auto& r : ds.records)
    (r.quality_tag == QualityTag::Clean ? clean : degraded).push_back(r.descriptor);
  if (cfg.g > 0 && degraded.empty())
    throw TooFewPoints("ghost init needs degraded examples in the dataset");

  Model m = make_model(ds.dim, cfg.k, cfg.g, cfg.d, identity_count(ds));
  m.gv = init_ghostvlad(clean, degraded, cfg.k, cfg.g, cfg.alpha, cfg.corpus.seed);

  std::vector<Eigen::VectorXd> pooled;
  pooled.reserve(clean.size());
  std::vector<double> one{1.0};
  for (const auto& x : clean)
    pooled.push_back(pool({x}, one, m.gv, true).values);
  auto [proj, bias] = init_projection_pca(pooled, cfg.d);
  m.head.proj = proj;
  m.head.proj_bias = bias;

  Rng rng = stream_rng(cfg.corpus.seed, 0x636c73ULL);  // "cls"
  for (Eigen::Index i = 0; i < m.classifier.rows(); ++i)
    for (Eigen::Index j = 0; j < m.classifier.cols(); ++j)
      m.classifier(i, j) = 0.01 * rng.next_gaussian();

  m.timestamp = cfg.no_timestamp ? 0 : static_cast<std::uint64_t>(std::time(nullptr));
  save_model(out_model, m);
}

void cmd_train(const std::string& dataset_path, const ExperimentConfig& cfg,
               const std::string& in_model, const std::string& out_model,
               const std::string& log_path) {
  Dataset ds = read_dataset(dataset_path);
  Model init_state = load_model(in_model);

  std::vector<char> stage2_mask(ds.records.size());
  for (std::size_t i = 0; i < ds.records.size(); ++i)
    stage2_mask[i] = ds.records[i].quality_tag == QualityTag::Clean;

  TrainResult res =
      train(ds.records, stage2_mask, identity_count(ds), cfg.train, init_state);

  if (!log_path.empty()) {
    std::ofstream os(log_path);
    if (!os) throw FormatError("cannot open " + log_path + " for writing");
    os << "epoch,stage,lr,train_loss,val_tar_far2\n";
    for (const auto& l : res.log)
      os << l.epoch << ',' << l.stage << ',' << fmt_double(l.lr) << ','
         << fmt_double(l.train_loss) << ',' << fmt_double(l.val_tar_far2) << '\n';
  }

  res.model.timestamp =
      cfg.no_timestamp ? 0 : static_cast<std::uint64_t>(std::time(nullptr));
  save_model(out_model, res.model);
}

void cmd_embed(const std::string& dataset_path, const std::string& model_path,
               const std::string& protocol_path, const std::string& out_path) {
  Dataset ds = read_dataset(dataset_path);
  Model m = load_model(model_path);
  if (ds.dim != m.dim_f())
    throw DimMismatch("dataset D_F != model D_F");

  auto templates = protocol_path.empty() ? default_templates(ds)
                                         : protocol_templates(ds, protocol_path);

  // embeddings file: GVD1 records, identity=subject, media_id=template id
  std::vector<ExampleRecord> out_records;
  for (const auto& [tid, t] : templates) {
    ExampleRecord r;
    r.identity = t.subject;
    r.media_id = static_cast<std::uint32_t>(tid);
    r.source_kind = SourceKind::Still;
    r.quality_tag = QualityTag::Clean;
    r.descriptor = embed_template(t, m.gv, m.head);
    out_records.push_back(std::move(r));
  }
  write_dataset(out_path, m.dim_out(), out_records);
}

void cmd_eval(const std::string& embeddings_path,
              const std::string& protocol_path, const std::string& out_dir) {
  Dataset ds = read_dataset(embeddings_path);
  EmbeddingStore store;
  std::vector<int> template_ids;
  for (const auto& r : ds.records) {
    TemplateEntry e;
    e.template_id = static_cast<int>(r.media_id);
    e.subject = static_cast<int>(r.identity);
    e.embedding = r.descriptor;
    template_ids.push_back(e.template_id);
    store[e.template_id] = std::move(e);
  }
  std::sort(template_ids.begin(), template_ids.end());

  std::vector<VerificationPair> pairs;
  std::vector<TemplateEntry> gallery, probes;
  if (!protocol_path.empty()) {
    std::ifstream is(protocol_path);
    if (!is) throw FormatError("cannot open protocol file " + protocol_path);
    nlohmann::json j;
    try {
      is >> j;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("eval protocol: ") + e.what());
    }
    for (const auto& p : j.value("pairs", nlohmann::json::array())) {
      int a = p.at(0).get<int>(), b = p.at(1).get<int>();
      pairs.push_back({a, b, store.at(a).subject == store.at(b).subject});
    }
    for (int id : j.value("gallery", std::vector<int>{}))
      gallery.push_back(store.at(id));
    for (int id : j.value("probes", std::vector<int>{}))
      probes.push_back(store.at(id));
  } else {
    // default protocol: all pairs; gallery holds the first template of each
    // multi-template subject, everything else probes
    for (std::size_t i = 0; i < template_ids.size(); ++i)
      for (std::size_t jdx = i + 1; jdx < template_ids.size(); ++jdx) {
        int a = template_ids[i], b = template_ids[jdx];
        pairs.push_back({a, b, store[a].subject == store[b].subject});
      }
    std::map<int, std::vector<int>> by_subject;
    for (int id : template_ids) by_subject[store[id].subject].push_back(id);
    for (const auto& [subj, ids] : by_subject) {
      if (ids.size() >= 2) {
        gallery.push_back(store[ids[0]]);
        for (std::size_t i = 1; i < ids.size(); ++i) probes.push_back(store[ids[i]]);
      } else {
        probes.push_back(store[ids[0]]);  // non-mated probe
      }
    }
  }

  std::filesystem::create_directories(out_dir);
  nlohmann::json summary;

  if (!pairs.empty()) {
    RocResult roc = verify(pairs, store);
    write_curve_csv(out_dir + "/roc.csv", "roc", roc.curve);
    for (double far : {1e-5, 1e-4, 1e-3, 1e-2, 1e-1})
      summary["tar_at_far"][fmt_double(far)] = roc.tar_at_far(far);
  }
  if (!gallery.empty() && !probes.empty()) {
    IdentifyResult idr = identify(probes, gallery);
    write_curve_csv(out_dir + "/det.csv", "det", idr.det);
    write_curve_csv(out_dir + "/cmc.csv", "cmc", idr.cmc);
    for (double fpir : {0.01, 0.1})
      summary["tpir_at_fpir"][fmt_double(fpir)] = idr.tpir_at_fpir(fpir);
    for (int rank : {1, 5, 10})
      summary["tpir_at_rank"][std::to_string(rank)] = idr.tpir_at_rank(rank);
  }

  std::ofstream os(out_dir + "/summary.json");
  if (!os) throw FormatError("cannot write summary.json");
  os << summary.dump(2) << '\n';
}

void cmd_contrib(const std::string& dataset_path, const std::string& model_path,
                 const std::string& out_path) {
  Dataset ds = read_dataset(dataset_path);
  Model m = load_model(model_path);
  if (ds.dim != m.dim_f()) throw DimMismatch("dataset D_F != model D_F");

  auto grouped = default_templates(ds);
  std::vector<Template> templates;
  std::vector<int> ids;
  for (auto& [tid, t] : grouped) {
    ids.push_back(tid);
    templates.push_back(std::move(t));
  }
  auto rows = contribution_report(templates, m, ids);

  std::ofstream os(out_path);
  if (!os) throw FormatError("cannot open " + out_path + " for writing");
  os << "template_id,example_idx,quality_tag,relative_contribution\n";
  for (const auto& r : rows)
    os << r.template_id << ',' << r.example_index << ','
       << (r.quality_tag == QualityTag::Degraded ? "degraded" : "clean") << ','
       << fmt_double(r.relative_contribution) << '\n';
}

void cmd_ablate(const std::string& dataset_path, const ExperimentConfig& cfg,
                const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::string tmp_model = out_dir + "/ablate_model.gvm";
  std::ofstream os(out_dir + "/ablate.csv");
  if (!os) throw FormatError("cannot open ablate.csv for writing");
  os << "k,g,set_size,d,final_train_loss,val_tar_far2\n";

  Dataset ds = read_dataset(dataset_path);
  int t_count = identity_count(ds);
  std::vector<char> stage2_mask(ds.records.size());
  for (std::size_t i = 0; i < ds.records.size(); ++i)
    stage2_mask[i] = ds.records[i].quality_tag == QualityTag::Clean;

  for (int k : cfg.grid_k)
    for (int g : cfg.grid_g)
      for (int set_size : cfg.grid_set_size)
        for (int d : cfg.grid_d) {
          ExperimentConfig run = cfg;
          run.k = k;
          run.g = g;
          run.d = d;
          run.train.set_size = set_size;
          cmd_init(dataset_path, run, tmp_model);
          Model init_state = load_model(tmp_model);
          TrainResult res =
              train(ds.records, stage2_mask, t_count, run.train, init_state);
          double loss = res.log.empty() ? 0.0 : res.log.back().train_loss;
          double tar = res.log.empty() ? 0.0 : res.log.back().val_tar_far2;
          os << k << ',' << g << ',' << set_size << ',' << d << ','
             << fmt_double(loss) << ',' << fmt_double(tar) << '\n';
        }
  std::filesystem::remove(tmp_model);
}

}  // namespace gvlad

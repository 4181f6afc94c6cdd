#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "gvlad/commands.hpp"
#include "gvlad/dataset_io.hpp"
#include "gvlad/model.hpp"

using namespace gvlad;
namespace fs = std::filesystem;

namespace {

fs::path work_dir() {
  auto dir = fs::temp_directory_path() / "gvlad_cli_tests";
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

ExperimentConfig small_cfg() {
  ExperimentConfig cfg;
  cfg.corpus.identities = 8;
  cfg.corpus.per_identity = 14;
  cfg.corpus.dim = 16;
  cfg.corpus.seed = 11;
  cfg.k = 2;
  cfg.g = 1;
  cfg.d = 8;
  cfg.train.seed = 11;
  cfg.train.set_size = 2;
  cfg.train.batch_sets = 8;
  cfg.train.stage2_epochs = 1;
  cfg.train.stage3_epochs = 1;
  cfg.no_timestamp = true;
  return cfg;
}

}  // namespace

TEST_CASE("config: key=value file applies and unknown keys are rejected") {
  auto p = work_dir() / "cfg.txt";
  {
    std::ofstream os(p);
    os << "# comment line\n";
    os << "identities = 12\n";
    os << "k=4\n";
    os << "alpha = 50\n";
    os << "\n";
    os << "set_size=3\n";
  }
  ExperimentConfig cfg;
  cfg.load_file(p.string());
  CHECK(cfg.corpus.identities == 12);
  CHECK(cfg.k == 4);
  CHECK(cfg.alpha == doctest::Approx(50.0));
  CHECK(cfg.train.set_size == 3);

  {
    std::ofstream os(p);
    os << "no_such_key=1\n";
  }
  CHECK_THROWS_AS(cfg.load_file(p.string()), InvalidSpec);
}

TEST_CASE("config: seed key seeds both the corpus and the trainer") {
  ExperimentConfig cfg;
  cfg.set("seed", "42");
  CHECK(cfg.corpus.seed == 42);
  CHECK(cfg.train.seed == 42);
}

TEST_CASE("core modules never inspect the quality tag") {
  // the degradation tag may steer dataset splits at the command layer, but
  // the math underneath has to stay blind to it
  for (const char* name :
       {"ghostvlad.cpp", "head.cpp", "model.cpp", "init.cpp", "training.cpp"}) {
    fs::path src = fs::path(GVLAD_SOURCE_DIR) / "src" / name;
    std::string text = slurp(src);
    REQUIRE_FALSE(text.empty());
    CHECK_MESSAGE(text.find("quality_tag") == std::string::npos, name);
  }
}

TEST_CASE("model file: round trip is bit-exact and corruption is caught") {
  auto dir = work_dir();
  Model m = make_model(8, 3, 1, 6, 5);
  m.gv.assign_w.setRandom();
  m.head.proj.setRandom();
  m.classifier.setRandom();
  m.timestamp = 0;

  auto p1 = dir / "m1.gvm", p2 = dir / "m2.gvm";
  save_model(p1.string(), m);
  Model loaded = load_model(p1.string());
  save_model(p2.string(), loaded);
  CHECK(slurp(p1) == slurp(p2));
  CHECK(loaded.gv.assign_w.cast<float>() == m.gv.assign_w.cast<float>());
  CHECK(loaded.classifier.cast<float>() == m.classifier.cast<float>());

  // corrupted magic
  std::string bytes = slurp(p1);
  bytes[0] = 'X';
  auto bad = dir / "bad.gvm";
  {
    std::ofstream os(bad, std::ios::binary);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  CHECK_THROWS_AS(load_model(bad.string()), FormatError);

  // truncated body
  {
    std::ofstream os(bad, std::ios::binary);
    os.write(slurp(p1).data(), static_cast<std::streamsize>(bytes.size() - 7));
  }
  CHECK_THROWS_AS(load_model(bad.string()), FormatError);
}

TEST_CASE("pipeline: gen -> init -> train -> embed -> eval -> contrib") {
  auto dir = work_dir() / "pipe";
  fs::create_directories(dir);
  ExperimentConfig cfg = small_cfg();

  auto data = dir / "data.gvd";
  cmd_gen(cfg, data.string());
  Dataset ds = read_dataset(data.string());
  CHECK(ds.dim == cfg.corpus.dim);
  CHECK(static_cast<int>(ds.records.size()) ==
        cfg.corpus.identities * cfg.corpus.per_identity);

  auto model0 = dir / "init.gvm";
  cmd_init(data.string(), cfg, model0.string());
  Model m0 = load_model(model0.string());
  CHECK(m0.gv.num_clusters == cfg.k);
  CHECK(m0.gv.num_ghosts == cfg.g);
  CHECK(m0.dim_out() == cfg.d);
  CHECK(m0.classifier.rows() == cfg.corpus.identities);
  CHECK(m0.timestamp == 0);  // no_timestamp

  auto model1 = dir / "trained.gvm";
  auto log = dir / "log.csv";
  cmd_train(data.string(), cfg, model0.string(), model1.string(), log.string());
  std::string log_text = slurp(log);
  CHECK(log_text.rfind("epoch,stage,lr,train_loss,val_tar_far2", 0) == 0);
  CHECK(std::count(log_text.begin(), log_text.end(), '\n') ==
        1 + cfg.train.stage2_epochs + cfg.train.stage3_epochs);

  auto emb = dir / "emb.gvd";
  cmd_embed(data.string(), model1.string(), "", emb.string());
  Dataset emb_ds = read_dataset(emb.string());
  CHECK(emb_ds.dim == cfg.d);
  // default protocol: two templates per identity
  CHECK(static_cast<int>(emb_ds.records.size()) == 2 * cfg.corpus.identities);
  for (const auto& r : emb_ds.records)
    CHECK(std::abs(r.descriptor.norm() - 1.0) < 1e-6);

  auto eval_dir = dir / "eval";
  cmd_eval(emb.string(), "", eval_dir.string());
  for (const char* f : {"roc.csv", "det.csv", "cmc.csv", "summary.json"})
    CHECK(fs::exists(eval_dir / f));
  std::string summary = slurp(eval_dir / "summary.json");
  CHECK(summary.find("tar_at_far") != std::string::npos);
  CHECK(summary.find("tpir_at_rank") != std::string::npos);

  auto contrib = dir / "contrib.csv";
  cmd_contrib(data.string(), model1.string(), contrib.string());
  std::string ctext = slurp(contrib);
  CHECK(ctext.rfind("template_id,example_idx,quality_tag,relative_contribution", 0) == 0);
  CHECK(std::count(ctext.begin(), ctext.end(), '\n') >= 2);
}

TEST_CASE("cmd_train: zero epochs copies the model, timestamp aside") {
  auto dir = work_dir() / "zero";
  fs::create_directories(dir);
  ExperimentConfig cfg = small_cfg();
  cfg.train.stage2_epochs = 0;
  cfg.train.stage3_epochs = 0;

  auto data = dir / "data.gvd";
  cmd_gen(cfg, data.string());
  auto model0 = dir / "init.gvm", model1 = dir / "out.gvm";
  cmd_init(data.string(), cfg, model0.string());
  cmd_train(data.string(), cfg, model0.string(), model1.string(),
            (dir / "log.csv").string());
  // no_timestamp pins both headers to 0, so the files match byte for byte
  CHECK(slurp(model0) == slurp(model1));
}

TEST_CASE("cmd_embed: explicit protocol file selects media") {
  auto dir = work_dir() / "proto";
  fs::create_directories(dir);
  ExperimentConfig cfg = small_cfg();
  auto data = dir / "data.gvd";
  cmd_gen(cfg, data.string());
  auto model0 = dir / "init.gvm";
  cmd_init(data.string(), cfg, model0.string());

  Dataset ds = read_dataset(data.string());
  auto proto = dir / "templates.jsonl";
  {
    std::ofstream os(proto);
    // one template with the first two media of identity 0
    os << R"({"template_id":501,"subject":0,"media":[)"
       << R"({"media_id":)" << ds.records[0].media_id << R"(,"kind":"still"},)"
       << R"({"media_id":)" << ds.records[1].media_id << R"(,"kind":"still"}]})"
       << "\n";
    os << R"({"template_id":502,"subject":1,"media":[)"
       << R"({"media_id":)" << ds.records[cfg.corpus.per_identity].media_id
       << R"(,"kind":"still"}]})" << "\n";
  }
  auto emb = dir / "emb.gvd";
  cmd_embed(data.string(), model0.string(), proto.string(), emb.string());
  Dataset emb_ds = read_dataset(emb.string());
  REQUIRE(emb_ds.records.size() == 2);
  CHECK(emb_ds.records[0].media_id == 501);
  CHECK(emb_ds.records[0].identity == 0);
  CHECK(emb_ds.records[1].media_id == 502);
  CHECK(emb_ds.records[1].identity == 1);
}

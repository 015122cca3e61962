#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "seaget/checkpoint.hpp"
#include "seaget/cli.hpp"
#include "seaget/config.hpp"
#include "seaget/errors.hpp"
#include "support/synthetic.hpp"

using namespace seaget;
using namespace seaget::testing;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("seaget_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

/// One preprocessed and trained workdir shared by the tests below.
const fs::path& trained_workdir() {
  static const fs::path dir = [] {
    const fs::path root = scratch("shared");
    std::ofstream(root / "log.tsv") << cyclic_log(3, 6, 60, 5, 7);
    const fs::path work = root / "work";
    REQUIRE(cli({"preprocess", "--input", (root / "log.tsv").string(), "--workdir", work.string()}).code == 0);
    REQUIRE(cli({"train", "--workdir", work.string(), "--epochs", "3", "--poi-width", "8", "--time-width", "8",
                 "--season-width", "8", "--alpha", "0.5", "--beta", "0.33", "--quiet"})
                .code == 0);
    return work;
  }();
  return dir;
}

std::string all_open_hours(std::size_t pois) {
  std::string s = "key_type,key,day,open,close\n";
  for (std::size_t p = 0; p < pois; ++p)
    for (int d = 0; d < 7; ++d) s += "poi,p" + std::to_string(p) + "," + std::to_string(d) + ",0,1440\n";
  return s;
}

}  // namespace

TEST_CASE("config parsing") {
  const RunConfig c = parse_run_config(
      "[paths]\ncheckins = a.tsv\nworkdir = w\n[train]\nlearning_rate = 0.01\neval_ks = 1,3\n"
      "[model]\npoi_width = 16\nedge_weighting = popularity_product\n[data]\nfilter_mode = single_pass\n");
  CHECK(c.checkins == "a.tsv");
  CHECK(c.workdir == "w");
  CHECK(c.train.learning_rate == 0.01);
  CHECK(c.train.eval_ks == std::vector<std::size_t>{1, 3});
  CHECK(c.train.widths.poi == 16);
  CHECK(c.train.edge_weighting == EdgeWeighting::popularity_product);
  CHECK(c.preprocess.filter_mode == FilterMode::single_pass);
  CHECK(c.train.batch_size == 16);

  const RunConfig back = parse_run_config(format_run_config(c));
  CHECK(format_run_config(back) == format_run_config(c));

  CHECK_THROWS_AS(parse_run_config("[train]\nlearning_rte = 0.1\n"), FormatError);
  CHECK_THROWS_AS(parse_run_config("[extra]\nx = 1\n"), FormatError);
  CHECK_THROWS_AS(parse_run_config("[train]\nbatch_size = many\n"), FormatError);
  CHECK_THROWS_AS(load_run_config("/nonexistent/run.ini"), IoError);
}

TEST_CASE("checkpoint round trip") {
  MicroSetup m = micro_setup(5);
  CheckpointMeta meta;
  meta.alpha = 0.67;
  meta.beta = 0.33;
  meta.epoch = 4;
  meta.seed = 99;
  const fs::path dir = scratch("ckpt");
  save_checkpoint(dir / "m.ckpt", m.model, meta);
  Checkpoint back = load_checkpoint(dir / "m.ckpt");
  CHECK(back.meta.alpha == 0.67);
  CHECK(back.meta.epoch == 4);
  CHECK(back.meta.seed == 99);
  CHECK(back.model.parameter_count() == m.model.parameter_count());
  std::vector<Parameter*> a = m.model.parameters(), b = back.model.parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i]->name == b[i]->name);
    CHECK(std::equal(a[i]->value.values().begin(), a[i]->value.values().end(), b[i]->value.values().begin()));
  }
  CHECK_FALSE(fs::exists(dir / "m.ckpt.tmp"));

  // Saving the loaded model again reproduces the file byte for byte.
  save_checkpoint(dir / "again.ckpt", back.model, back.meta);
  CHECK(slurp(dir / "m.ckpt") == slurp(dir / "again.ckpt"));

  std::string bytes = slurp(dir / "m.ckpt");
  std::ofstream(dir / "short.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() - 8);
  CHECK_THROWS_AS(load_checkpoint(dir / "short.ckpt"), FormatError);
  bytes[0] = 'X';
  std::ofstream(dir / "magic.ckpt", std::ios::binary) << bytes;
  CHECK_THROWS_AS(load_checkpoint(dir / "magic.ckpt"), FormatError);
  fs::remove_all(dir);
}

TEST_CASE("matrix export round trip") {
  const fs::path dir = scratch("matrix");
  const Tensor m = Tensor::from_rows({{1.5, -2.0, 3.0}, {0.0, 1e-300, 7.25}});
  write_matrix(dir / "m.sgmx", m);
  const Tensor back = read_matrix(dir / "m.sgmx");
  CHECK(back.rows() == 2);
  CHECK(back.cols() == 3);
  CHECK(std::equal(m.values().begin(), m.values().end(), back.values().begin()));
  CHECK(fs::file_size(dir / "m.sgmx") == 4 + 4 + 8 + 8 + 6 * 8);
  fs::remove_all(dir);
}

TEST_CASE("help and usage errors") {
  CHECK(cli({"--help"}).code == 0);
  const Run train_help = cli({"train", "--help"});
  CHECK(train_help.code == 0);
  CHECK(train_help.out.find("--alpha") != std::string::npos);
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
}

TEST_CASE("preprocess is idempotent and refuses missing input") {
  const fs::path root = scratch("pre");
  std::ofstream(root / "log.tsv") << cyclic_log(2, 5, 20, 4, 3);
  const Run first = cli({"preprocess", "--input", (root / "log.tsv").string(), "--workdir", (root / "a").string()});
  REQUIRE(first.code == 0);
  CHECK(first.out.find("2 5 3 80 20") != std::string::npos);
  REQUIRE(cli({"preprocess", "--input", (root / "log.tsv").string(), "--workdir", (root / "b").string()}).code == 0);
  for (const char* f : {"train.tsv", "val.tsv", "test.tsv", "idmap.tsv", "stats.txt"}) {
    CAPTURE(f);
    CHECK(slurp(root / "a" / f) == slurp(root / "b" / f));
  }

  const Run missing = cli({"preprocess", "--input", (root / "nope.tsv").string(), "--workdir", (root / "c").string()});
  CHECK(missing.code == kExitUsage);
  CHECK_FALSE(fs::exists(root / "c"));

  std::ofstream(root / "bad.tsv") << "u1\tp1\tonly three\n";
  const Run bad = cli({"preprocess", "--input", (root / "bad.tsv").string(), "--workdir", (root / "d").string()});
  CHECK(bad.code == kExitUsage);
  CHECK(bad.err.find("line 1") != std::string::npos);
  fs::remove_all(root);
}

TEST_CASE("train records its settings and rejects bad alpha") {
  const fs::path& work = trained_workdir();
  REQUIRE(fs::exists(work / "model.ckpt"));
  REQUIRE(fs::exists(work / "train_log.csv"));
  const Checkpoint ck = load_checkpoint(work / "model.ckpt");
  CHECK(ck.meta.alpha == 0.5);
  CHECK(ck.meta.beta == 0.33);
  const std::string header = slurp(work / "model.ckpt").substr(0, 4096);
  CHECK(header.find("\"alpha\":0.5") != std::string::npos);
  CHECK(header.find("\"beta\":0.33") != std::string::npos);

  CHECK(cli({"train", "--workdir", work.string(), "--alpha", "1.5", "--epochs", "1"}).code == kExitUsage);
}

TEST_CASE("graph export") {
  const fs::path& work = trained_workdir();
  REQUIRE(cli({"build-graph", "--workdir", work.string()}).code == 0);
  CHECK(slurp(work / "graph_edges.csv").rfind("src,dst,weight\n", 0) == 0);
  CHECK(slurp(work / "popularity.csv").rfind("poi_id,", 0) == 0);
  REQUIRE(cli({"export-embeddings", "--workdir", work.string()}).code == 0);
  const Tensor phi = read_matrix(work / "transition_attention.sgmx");
  CHECK(phi.rows() == 6);
  CHECK(phi.cols() == 6);
  CHECK(read_matrix(work / "poi_embeddings.sgmx").cols() == 8);
}

TEST_CASE("evaluate with an all-open table matches the unfiltered report") {
  const fs::path& work = trained_workdir();
  std::ofstream(work / "open.csv") << all_open_hours(6);
  const Run off = cli({"evaluate", "--workdir", work.string(), "--filter", "off", "--output", (work / "off.csv").string()});
  const Run on = cli({"evaluate", "--workdir", work.string(), "--filter", "on", "--hours", (work / "open.csv").string(),
                      "--output", (work / "on.csv").string()});
  REQUIRE(off.code == 0);
  REQUIRE(on.code == 0);
  CHECK(slurp(work / "off.csv") == slurp(work / "on.csv"));
  CHECK(slurp(work / "off.csv").rfind("acc@1,acc@5,acc@10,acc@20,mrr,count", 0) == 0);
  CHECK(cli({"baseline", "--workdir", work.string(), "--kind", "both"}).code == 0);
}

TEST_CASE("evaluate rejects a checkpoint from another dataset") {
  const fs::path root = scratch("mismatch");
  std::ofstream(root / "log.tsv") << cyclic_log(3, 7, 40, 4, 2);
  REQUIRE(cli({"preprocess", "--input", (root / "log.tsv").string(), "--workdir", root.string()}).code == 0);
  const Run r = cli({"evaluate", "--workdir", root.string(), "--checkpoint", (trained_workdir() / "model.ckpt").string()});
  CHECK(r.code == kExitUsage);
  fs::remove_all(root);
}

TEST_CASE("recommend") {
  const fs::path& work = trained_workdir();
  const std::vector<std::string> base = {"recommend", "--workdir", work.string(), "--user", "u1",
                                         "--trajectory", "p2@2012-05-01T09:00,p3@2012-05-01T10:30", "--k", "4"};
  auto with = [&](std::vector<std::string> extra) {
    std::vector<std::string> a = base;
    a.insert(a.end(), extra.begin(), extra.end());
    return cli(a);
  };
  const Run first = with({});
  const Run second = with({});
  REQUIRE(first.code == 0);
  CHECK(first.out == second.out);
  CHECK(first.out.rfind("rank\tpoi_id\tcategory\tscore\n", 0) == 0);

  // Every category only opens on Mondays; p0 and p1 also open on that Tuesday.
  const std::string mondays_only = "category,c0,0,0,60\ncategory,c1,0,0,60\ncategory,c2,0,0,60\n";
  std::ofstream(work / "two_open.csv") << "poi,p0,1,0,1440\npoi,p1,1,0,1440\n" << mondays_only;
  const Run few = with({"--hours", (work / "two_open.csv").string()});
  REQUIRE(few.code == 0);
  CHECK(few.err.find("only 2 POIs are open") != std::string::npos);
  CHECK(std::count(few.out.begin(), few.out.end(), '\n') == 3);

  std::ofstream(work / "closed.csv") << mondays_only;
  const Run closed = with({"--hours", (work / "closed.csv").string()});
  REQUIRE(closed.code == 0);
  CHECK(closed.err.find("every POI is closed") != std::string::npos);
  const Run unfiltered = with({"--filter", "off"});
  CHECK(closed.out == unfiltered.out);

  CHECK(cli({"recommend", "--workdir", work.string(), "--user", "u9", "--trajectory", "p1@2012-05-01T09:00"}).code ==
        kExitUsage);
  const Run unknown_poi = cli({"recommend", "--workdir", work.string(), "--user", "u1", "--trajectory", "p77@2012-05-01T09:00"});
  CHECK(unknown_poi.code == kExitUsage);
  CHECK(unknown_poi.err.find("p77") != std::string::npos);
}

TEST_CASE("sweep emits one row per grid cell") {
  const fs::path& work = trained_workdir();
  const Run r = cli({"sweep", "--workdir", work.string(), "--epochs", "1", "--poi-width", "4", "--time-width", "4",
                     "--season-width", "4", "--output", (work / "sweep.csv").string()});
  REQUIRE(r.code == 0);
  const std::string csv = slurp(work / "sweep.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 10);
  CHECK(csv.find("\n0.33,0.33,") != std::string::npos);
}

#include "seaget/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <vector>

#include "json.hpp"

#include "seaget/errors.hpp"

namespace seaget {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

using nlohmann::json;

constexpr char kCheckpointMagic[8] = {'S', 'E', 'A', 'G', 'E', 'T', 'C', 'K'};
constexpr char kMatrixMagic[4] = {'S', 'G', 'M', 'X'};
constexpr std::uint32_t kDtypeF64 = 1;

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in, const std::string& what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError(what + ": truncated file");
  return v;
}

json config_to_json(const ModelConfig& c) {
  return json{{"num_pois", c.num_pois},
              {"num_categories", c.num_categories},
              {"num_users", c.num_users},
              {"feature_width", c.feature_width},
              {"poi_width", c.widths.poi},
              {"time_width", c.widths.time},
              {"season_width", c.widths.season},
              {"gcn_hidden_layers", c.gcn_hidden_layers},
              {"encoder_layers", c.encoder_layers},
              {"heads", c.heads},
              {"ff_width", c.ffn()},
              {"dropout", c.dropout}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.num_pois = j.at("num_pois").get<std::size_t>();
  c.num_categories = j.at("num_categories").get<std::size_t>();
  c.num_users = j.at("num_users").get<std::size_t>();
  c.feature_width = j.at("feature_width").get<std::size_t>();
  c.widths.poi = j.at("poi_width").get<std::size_t>();
  c.widths.time = j.at("time_width").get<std::size_t>();
  c.widths.season = j.at("season_width").get<std::size_t>();
  c.gcn_hidden_layers = j.at("gcn_hidden_layers").get<std::size_t>();
  c.encoder_layers = j.at("encoder_layers").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.ff_width = j.at("ff_width").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  return c;
}

json meta_to_json(const CheckpointMeta& m) {
  return json{{"alpha", m.alpha},
              {"beta", m.beta},
              {"recent_cutoff", m.recent_cutoff},
              {"seed", m.seed},
              {"edge_weighting", m.edge_weighting},
              {"epoch", m.epoch},
              {"validation_loss", m.validation_loss},
              {"rng", {{"dropout", m.dropout_rng_counter}, {"shuffle", m.shuffle_rng_counter}}}};
}

CheckpointMeta meta_from_json(const json& j) {
  CheckpointMeta m;
  m.alpha = j.at("alpha").get<double>();
  m.beta = j.at("beta").get<double>();
  m.recent_cutoff = j.at("recent_cutoff").get<std::int64_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.edge_weighting = j.at("edge_weighting").get<std::string>();
  m.epoch = j.at("epoch").get<std::size_t>();
  m.validation_loss = j.at("validation_loss").get<double>();
  m.dropout_rng_counter = j.at("rng").at("dropout").get<std::uint64_t>();
  m.shuffle_rng_counter = j.at("rng").at("shuffle").get<std::uint64_t>();
  return m;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, ModelState& model, const CheckpointMeta& meta) {
  json tensors = json::array();
  std::size_t offset = 0;
  model.for_each_parameter([&](Parameter& p) {
    tensors.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()},
                       {"offset", offset}});
    offset += p.value.size();
  });
  const json header{{"format", "seaget-checkpoint"}, {"version", 1},          {"dtype", "f64"},
                    {"config", config_to_json(model.config)}, {"meta", meta_to_json(meta)},
                    {"tensors", tensors}};
  const std::string text = header.dump();

  // Write to a sibling file first so a crash never leaves a torn checkpoint.
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(kCheckpointMagic, sizeof kCheckpointMagic);
    put<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    model.for_each_parameter([&](Parameter& p) {
      const auto vals = p.value.values();
      out.write(reinterpret_cast<const char*>(vals.data()),
                static_cast<std::streamsize>(vals.size() * sizeof(double)));
    });
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[sizeof kCheckpointMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw FormatError(path.string() + ": not a seaget checkpoint");
  }
  const auto header_len = get<std::uint64_t>(in, path.string());
  if (header_len > (1u << 26)) throw FormatError(path.string() + ": implausible header length");
  std::string text(header_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) {
    throw FormatError(path.string() + ": truncated header");
  }

  Checkpoint ck;
  std::vector<double> payload;
  json header;
  try {
    header = json::parse(text);
    if (header.at("dtype") != "f64") throw FormatError(path.string() + ": unsupported dtype");
    ck.meta = meta_from_json(header.at("meta"));
    ck.model = ModelState::init(config_from_json(header.at("config")), 0);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": bad header: " + e.what());
  }

  std::map<std::string, Parameter*> by_name;
  ck.model.for_each_parameter([&](Parameter& p) { by_name[p.name] = &p; });
  std::size_t expected = 0;
  for (const auto& [name, p] : by_name) expected += p->value.size();
  payload.resize(expected);
  if (!in.read(reinterpret_cast<char*>(payload.data()),
               static_cast<std::streamsize>(expected * sizeof(double)))) {
    throw FormatError(path.string() + ": truncated payload");
  }

  std::size_t seen = 0;
  try {
    for (const auto& t : header.at("tensors")) {
      const auto name = t.at("name").get<std::string>();
      const auto it = by_name.find(name);
      if (it == by_name.end()) throw FormatError(path.string() + ": unexpected tensor " + name);
      Tensor& v = it->second->value;
      const auto rows = t.at("rows").get<std::size_t>();
      const auto cols = t.at("cols").get<std::size_t>();
      const auto offset = t.at("offset").get<std::size_t>();
      if (rows != v.rows() || cols != v.cols() || offset + v.size() > payload.size()) {
        throw FormatError(path.string() + ": tensor " + name + " has the wrong shape");
      }
      std::copy_n(payload.begin() + static_cast<std::ptrdiff_t>(offset), v.size(), v.values().begin());
      ++seen;
    }
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": bad tensor table: " + e.what());
  }
  if (seen != by_name.size()) throw FormatError(path.string() + ": missing tensors");
  return ck;
}

void write_matrix(const std::filesystem::path& path, const Tensor& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kMatrixMagic, sizeof kMatrixMagic);
  put<std::uint32_t>(out, kDtypeF64);
  put<std::uint64_t>(out, m.rows());
  put<std::uint64_t>(out, m.cols());
  const auto vals = m.values();
  out.write(reinterpret_cast<const char*>(vals.data()),
            static_cast<std::streamsize>(vals.size() * sizeof(double)));
  if (!out) throw IoError("write failed for " + path.string());
}

Tensor read_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[sizeof kMatrixMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMatrixMagic, sizeof magic) != 0) {
    throw FormatError(path.string() + ": not a matrix file");
  }
  if (get<std::uint32_t>(in, path.string()) != kDtypeF64) {
    throw FormatError(path.string() + ": unsupported dtype");
  }
  const auto rows = get<std::uint64_t>(in, path.string());
  const auto cols = get<std::uint64_t>(in, path.string());
  Tensor m(rows, cols);
  auto vals = m.values();
  if (!in.read(reinterpret_cast<char*>(vals.data()),
               static_cast<std::streamsize>(vals.size() * sizeof(double)))) {
    throw FormatError(path.string() + ": truncated payload");
  }
  return m;
}

}  // namespace seaget

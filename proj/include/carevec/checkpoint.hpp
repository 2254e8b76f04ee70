#pragma once

// Checkpoint file: one JSON header line, then every tensor as little-endian
// IEEE-754 doubles in row-major order, in the fixed tensor order.

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "carevec/encoding.hpp"
#include "carevec/model.hpp"

namespace carevec {

inline constexpr std::string_view kCheckpointFormat = "carevec-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  Vocabulary vocab;
  std::uint64_t split_seed = 0;
  nlohmann::json train_config = nlohmann::json::object();
};

namespace detail {

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline void put_le(std::string& out, double x) {
  auto bits = std::bit_cast<std::uint64_t>(x);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

inline double get_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

inline nlohmann::json dims_json(const ModelDims& d) {
  return {{"codes", d.codes},
          {"code_dim", d.code_dim},
          {"visit_dim", d.visit_dim},
          {"patient_dim", d.patient_dim},
          {"visit_demo", d.visit_demo},
          {"patient_demo", d.patient_demo}};
}

}  // namespace detail

inline void save_checkpoint(std::ostream& out, const Checkpoint& ck) {
  const auto& P = ck.params;
  nlohmann::json tensors = nlohmann::json::array();
  P.for_each_tensor([&](ModelParams::TensorRef t) {
    tensors.push_back({{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}});
  });
  nlohmann::json header = {{"format", kCheckpointFormat},
                           {"version", kCheckpointVersion},
                           {"mode", to_string(P.mode)},
                           {"score_form", to_string(P.score_form)},
                           {"dims", detail::dims_json(P.dims)},
                           {"tensors", tensors},
                           {"vocab", ck.vocab.codes()},
                           {"places", ck.vocab.places()},
                           {"categories", ck.vocab.categories()},
                           {"vocab_hash", detail::hex64(ck.vocab.hash())},
                           {"split_seed", ck.split_seed},
                           {"train_config", ck.train_config}};
  std::string blob;
  blob.reserve(P.parameter_count() * 8);
  P.for_each_tensor([&](ModelParams::TensorRef t) {
    // Eigen storage is column-major; the file is row-major.
    for (Eigen::Index r = 0; r < t.rows; ++r) {
      for (Eigen::Index c = 0; c < t.cols; ++c) detail::put_le(blob, t.data[c * t.rows + r]);
    }
  });
  out << header.dump() << '\n';
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw CheckpointError("failed writing checkpoint");
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint '" + path + "'");
  save_checkpoint(out, ck);
}

inline Checkpoint load_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw CheckpointTruncatedError("checkpoint is empty");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    throw CheckpointVersionError("checkpoint header is not a carevec header");
  }
  if (!h.is_object() || h.value("format", "") != kCheckpointFormat) {
    throw CheckpointVersionError("checkpoint header is not a carevec header");
  }
  if (!h.contains("version") || !h["version"].is_number_integer() || h["version"].get<int>() != kCheckpointVersion) {
    throw CheckpointVersionError("unsupported checkpoint version " + (h.contains("version") ? h["version"].dump() : "?") +
                                 ", expected " + std::to_string(kCheckpointVersion));
  }

  Checkpoint ck;
  try {
    ModelDims d;
    const auto& dj = h.at("dims");
    d.codes = dj.at("codes").get<std::size_t>();
    d.code_dim = dj.at("code_dim").get<std::size_t>();
    d.visit_dim = dj.at("visit_dim").get<std::size_t>();
    d.patient_dim = dj.at("patient_dim").get<std::size_t>();
    d.visit_demo = dj.at("visit_demo").get<std::size_t>();
    d.patient_demo = dj.at("patient_demo").get<std::size_t>();
    const Mode mode = parse_mode(h.at("mode").get<std::string>());
    const ScoreForm form = parse_score_form(h.at("score_form").get<std::string>());
    ck.params = make_zero_params(mode, d, form);
    ck.vocab = Vocabulary(h.at("vocab").get<std::vector<std::string>>(), h.at("places").get<std::vector<std::string>>(),
                          h.at("categories").get<std::vector<std::string>>());
    ck.split_seed = h.at("split_seed").get<std::uint64_t>();
    ck.train_config = h.value("train_config", nlohmann::json::object());
    if (h.at("vocab_hash").get<std::string>() != detail::hex64(ck.vocab.hash())) {
      throw CheckpointShapeError("checkpoint vocabulary does not match its hash");
    }
    if (ck.vocab.size() != d.codes || ck.vocab.visit_demo_dim() != d.visit_demo) {
      throw CheckpointShapeError("checkpoint vocabulary does not match its dimensions");
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointShapeError(std::string("malformed checkpoint header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointShapeError(std::string("malformed checkpoint header: ") + e.what());
  }

  // Declared shapes must equal the shapes implied by mode and dims.
  const auto& declared = h.at("tensors");
  std::size_t k = 0;
  ck.params.for_each_tensor([&](ModelParams::TensorRef t) {
    if (k >= declared.size()) throw CheckpointShapeError("checkpoint lists too few tensors");
    const auto& dt = declared[k++];
    if (dt.value("name", "") != t.name || dt.value("rows", -1L) != t.rows || dt.value("cols", -1L) != t.cols) {
      throw CheckpointShapeError("tensor " + std::string(t.name) + " has shape " + dt.dump() + ", expected " +
                                 std::to_string(t.rows) + "x" + std::to_string(t.cols));
    }
  });
  if (k != declared.size()) throw CheckpointShapeError("checkpoint lists too many tensors");

  const std::size_t need = ck.params.parameter_count() * 8;
  std::string blob(need, '\0');
  in.read(blob.data(), static_cast<std::streamsize>(need));
  if (static_cast<std::size_t>(in.gcount()) != need) {
    throw CheckpointTruncatedError("checkpoint tensor data truncated: " + std::to_string(in.gcount()) + " of " +
                                   std::to_string(need) + " bytes");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw CheckpointShapeError("trailing bytes after tensor data");
  const auto* p = reinterpret_cast<const unsigned char*>(blob.data());
  ck.params.for_each_tensor([&](ModelParams::TensorRef t) {
    for (Eigen::Index r = 0; r < t.rows; ++r) {
      for (Eigen::Index c = 0; c < t.cols; ++c) {
        t.data[c * t.rows + r] = detail::get_le(p);
        p += 8;
      }
    }
  });
  return ck;
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  return load_checkpoint(in);
}

}  // namespace carevec

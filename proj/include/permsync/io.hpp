#pragma once

// File formats.
//
// Binary instance container (all integers and floats little-endian):
//
//   offset  type      field
//   0       char[8]   magic "PSYNCIN1"
//   8       u32       format version (1)
//   12      u32       truth mode (0 = uniform-random, 1 = all-identity)
//   16      u64       n
//   24      u64       d
//   32      f64       p
//   40      f64       sigma
//   48      u64       seed
//   56      u32       has_truth (0 or 1)
//   60      u32       reserved (0)
//   64      u32[n*d]  truth images, object-major (only when has_truth = 1)
//   ...     u64       observed pair count P
//   ...     P records of { u32 j, u32 k, f64[d*d] X_jk row-major }, j < k,
//           sorted by (j, k)
//
// The JSON container carries the same fields:
//   {"format":"permsync-instance","version":1,"n":..,"d":..,"p":..,
//    "sigma":..,"seed":..,"truth_mode":"random"|"identity",
//    "truth":[[..],..] (optional),"blocks":[{"j":..,"k":..,"x":[..]},..]}

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "permsync/error.hpp"
#include "permsync/format.hpp"
#include "permsync/model.hpp"
#include "permsync/permutation.hpp"

namespace permsync {

namespace detail {

inline constexpr char kInstanceMagic[8] = {'P', 'S', 'Y', 'N', 'C', 'I', 'N', '1'};

template <class T>
void put_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T> && (sizeof(T) == 4 || sizeof(T) == 8));
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  auto bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>(bits & 0xFFu));
    bits >>= 8;
  }
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  template <class T>
  T get() {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    if (pos_ + sizeof(T) > data_.size()) throw FormatError("instance file truncated");
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      bits |= static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return std::bit_cast<T>(bits);
  }

  std::string_view take(std::size_t count) {
    if (pos_ + count > data_.size()) throw FormatError("instance file truncated");
    auto out = data_.substr(pos_, count);
    pos_ += count;
    return out;
  }

  bool done() const { return pos_ == data_.size(); }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline Instance rebuild(ModelParams params, std::vector<Permutation> truth, std::vector<Instance::Pair> pairs,
                        std::vector<double> blocks) {
  try {
    return Instance(params, std::move(truth), std::move(pairs), std::move(blocks));
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("invalid instance: ") + e.what());
  }
}

}  // namespace detail

inline std::string encode_instance(const Instance& inst) {
  std::string out(detail::kInstanceMagic, sizeof(detail::kInstanceMagic));
  const auto& p = inst.params();
  detail::put_le<std::uint32_t>(out, 1);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.truth_mode));
  detail::put_le<std::uint64_t>(out, p.n);
  detail::put_le<std::uint64_t>(out, p.d);
  detail::put_le<double>(out, p.p);
  detail::put_le<double>(out, p.sigma);
  detail::put_le<std::uint64_t>(out, p.seed);
  detail::put_le<std::uint32_t>(out, inst.has_truth() ? 1 : 0);
  detail::put_le<std::uint32_t>(out, 0);
  for (const auto& z : inst.truth())
    for (int v : z.images()) detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(v));
  detail::put_le<std::uint64_t>(out, inst.observed_pairs());
  for (std::size_t i = 0; i < inst.observed_pairs(); ++i) {
    detail::put_le<std::uint32_t>(out, inst.pairs()[i].j);
    detail::put_le<std::uint32_t>(out, inst.pairs()[i].k);
    for (double x : inst.block(i)) detail::put_le<double>(out, x);
  }
  return out;
}

inline Instance decode_instance(std::string_view bytes) {
  detail::ByteReader rd(bytes);
  if (rd.take(8) != std::string_view(detail::kInstanceMagic, 8)) throw FormatError("not a permsync instance file");
  if (rd.get<std::uint32_t>() != 1) throw FormatError("unsupported instance format version");
  ModelParams params;
  const auto mode = rd.get<std::uint32_t>();
  if (mode > 1) throw FormatError("bad truth mode");
  params.truth_mode = static_cast<TruthMode>(mode);
  params.n = rd.get<std::uint64_t>();
  params.d = rd.get<std::uint64_t>();
  params.p = rd.get<double>();
  params.sigma = rd.get<double>();
  params.seed = rd.get<std::uint64_t>();
  const auto has_truth = rd.get<std::uint32_t>();
  rd.get<std::uint32_t>();
  try {
    params.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("invalid instance header: ") + e.what());
  }
  const std::size_t n = params.n, d = params.d;
  std::vector<Permutation> truth;
  if (has_truth) {
    truth.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
      std::vector<int> images(d);
      for (auto& v : images) v = static_cast<int>(rd.get<std::uint32_t>());
      try {
        truth.emplace_back(std::move(images));
      } catch (const InvalidArgument& e) {
        throw FormatError(e.what());
      }
    }
  }
  const auto count = rd.get<std::uint64_t>();
  if (count > n * (n - 1) / 2) throw FormatError("pair count exceeds n(n-1)/2");
  std::vector<Instance::Pair> pairs(count);
  std::vector<double> blocks(count * d * d);
  for (std::size_t i = 0; i < count; ++i) {
    pairs[i].j = rd.get<std::uint32_t>();
    pairs[i].k = rd.get<std::uint32_t>();
    for (std::size_t e = 0; e < d * d; ++e) blocks[i * d * d + e] = rd.get<double>();
  }
  if (!rd.done()) throw FormatError("trailing bytes after instance data");
  return detail::rebuild(params, std::move(truth), std::move(pairs), std::move(blocks));
}

inline nlohmann::json instance_to_json(const Instance& inst) {
  const auto& p = inst.params();
  nlohmann::json j;
  j["format"] = "permsync-instance";
  j["version"] = 1;
  j["n"] = p.n;
  j["d"] = p.d;
  j["p"] = p.p;
  j["sigma"] = p.sigma;
  j["seed"] = p.seed;
  j["truth_mode"] = to_string(p.truth_mode);
  if (inst.has_truth()) {
    auto& t = j["truth"] = nlohmann::json::array();
    for (const auto& z : inst.truth()) t.push_back(z.images());
  }
  auto& blocks = j["blocks"] = nlohmann::json::array();
  for (std::size_t i = 0; i < inst.observed_pairs(); ++i) {
    const auto vals = inst.block(i);
    blocks.push_back({{"j", inst.pairs()[i].j},
                      {"k", inst.pairs()[i].k},
                      {"x", std::vector<double>(vals.begin(), vals.end())}});
  }
  return j;
}

inline Instance instance_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "permsync-instance" || j.at("version") != 1)
      throw FormatError("not a permsync instance document");
    ModelParams params;
    params.n = j.at("n").get<std::size_t>();
    params.d = j.at("d").get<std::size_t>();
    params.p = j.at("p").get<double>();
    params.sigma = j.at("sigma").get<double>();
    params.seed = j.at("seed").get<std::uint64_t>();
    params.truth_mode = parse_truth_mode(j.at("truth_mode").get<std::string>());
    params.validate();
    std::vector<Permutation> truth;
    if (j.contains("truth"))
      for (const auto& z : j.at("truth")) truth.emplace_back(z.get<std::vector<int>>());
    std::vector<Instance::Pair> pairs;
    std::vector<double> blocks;
    for (const auto& b : j.at("blocks")) {
      pairs.push_back({b.at("j").get<std::uint32_t>(), b.at("k").get<std::uint32_t>()});
      const auto x = b.at("x").get<std::vector<double>>();
      if (x.size() != params.d * params.d) throw FormatError("block has wrong size");
      blocks.insert(blocks.end(), x.begin(), x.end());
    }
    return detail::rebuild(params, std::move(truth), std::move(pairs), std::move(blocks));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad instance JSON: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("bad instance JSON: ") + e.what());
  }
}

/// Writes JSON when the path ends in ".json", the binary container otherwise.
inline void save_instance(const Instance& inst, const std::filesystem::path& path) {
  if (path.extension() == ".json") {
    detail::write_file(path, instance_to_json(inst).dump() + "\n");
  } else {
    detail::write_file(path, encode_instance(inst));
  }
}

inline Instance load_instance(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  if (path.extension() == ".json") {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(bytes);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("bad instance JSON: ") + e.what());
    }
    return instance_from_json(j);
  }
  return decode_instance(bytes);
}

/// Estimate CSV: header "object_index,image_0,...,image_{d-1}", one row per object.
inline std::string estimates_to_csv(std::span<const Permutation> perms) {
  std::string out = "object_index";
  const std::size_t d = perms.empty() ? 0 : perms[0].size();
  for (std::size_t i = 0; i < d; ++i) out += ",image_" + std::to_string(i);
  out += '\n';
  for (std::size_t j = 0; j < perms.size(); ++j) {
    out += std::to_string(j);
    for (int v : perms[j].images()) out += ',' + std::to_string(v);
    out += '\n';
  }
  return out;
}

inline std::vector<Permutation> estimates_from_csv(std::string_view text) {
  const auto rows = split_lines(text);
  if (rows.empty() || !rows[0].starts_with("object_index")) throw FormatError("estimates CSV: missing header");
  const std::size_t d = split_csv_row(rows[0]).size() - 1;
  std::vector<Permutation> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto cells = split_csv_row(rows[r]);
    if (cells.size() != d + 1) throw FormatError("estimates CSV: wrong column count");
    if (parse_int(cells[0]) != static_cast<long long>(r - 1)) throw FormatError("estimates CSV: bad object index");
    std::vector<int> images;
    for (std::size_t c = 1; c <= d; ++c) images.push_back(static_cast<int>(parse_int(cells[c])));
    try {
      out.emplace_back(std::move(images));
    } catch (const InvalidArgument& e) {
      throw FormatError(e.what());
    }
  }
  return out;
}

}  // namespace permsync

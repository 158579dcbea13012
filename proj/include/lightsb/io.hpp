#pragma once

// File formats:
//   datasets     CSV with header x0,...,x{D-1} (17 significant digits), or binary
//                "LSBDATA1" | u64 N | u64 D | N*D float64, row-major, little-endian
//   checkpoints  JSON {format, version, dim, n_components, epsilon, log_weights,
//                means, log_scales}, numbers written with 17 significant digits
//   trajectories binary 32-byte header "LSBTRAJ1" | u64 P | u32 T | u32 D | f64 eps,
//                then P*T*D float64; times in a sidecar CSV
//   plans        binary "LSBPLAN1" | u64 N | u64 M | u64 D | support0 | support1 | log_plan

#include "lightsb/core.hpp"
#include "lightsb/dynamics.hpp"
#include "lightsb/mixture_potential.hpp"
#include "lightsb/sinkhorn.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace lightsb {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

class IoError : public Error {
public:
  using Error::Error;
};

inline constexpr std::string_view kDatasetMagic = "LSBDATA1";
inline constexpr std::string_view kTrajectoryMagic = "LSBTRAJ1";
inline constexpr std::string_view kPlanMagic = "LSBPLAN1";
inline constexpr std::string_view kCheckpointFormat = "lightsb-checkpoint";
inline constexpr int kCheckpointVersion = 1;

/// %.17g: enough digits to round-trip any double.
inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  const int n = std::snprintf(buf.data(), buf.size(), "%.17g", v);
  return {buf.data(), static_cast<std::size_t>(n)};
}

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get(std::string_view bytes, std::size_t& offset, const std::string& what) {
  if (offset + sizeof(T) > bytes.size()) {
    throw IoError(what + ": truncated file");
  }
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  offset += sizeof(T);
  return value;
}

inline void put_doubles(std::string& out, const double* data, std::size_t count) {
  out.append(reinterpret_cast<const char*>(data), count * sizeof(double));
}

inline void get_doubles(std::string_view bytes, std::size_t& offset, double* data, std::size_t count,
                        const std::string& what) {
  if (offset + count * sizeof(double) > bytes.size()) {
    throw IoError(what + ": truncated file");
  }
  std::memcpy(data, bytes.data() + offset, count * sizeof(double));
  offset += count * sizeof(double);
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) {
      return out;
    }
    start = pos + 1;
  }
}

inline double parse_double(std::string_view field, const std::string& where) {
  double v = 0.0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw IoError(where + ": cannot parse number '" + std::string(field) + "'");
  }
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Datasets

enum class DatasetLayout { automatic, csv, binary };

struct DatasetFile {
  std::filesystem::path path;
  DatasetLayout layout = DatasetLayout::automatic;
};

inline std::string samples_to_csv(const SampleSet& s) {
  std::string out;
  for (Index d = 0; d < s.dim(); ++d) {
    out += (d ? ",x" : "x") + std::to_string(d);
  }
  out += '\n';
  for (Index i = 0; i < s.size(); ++i) {
    for (Index d = 0; d < s.dim(); ++d) {
      if (d) {
        out += ',';
      }
      out += format_double(s.data()(i, d));
    }
    out += '\n';
  }
  return out;
}

inline std::string samples_to_binary(const SampleSet& s) {
  std::string out(kDatasetMagic);
  detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(s.size()));
  detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(s.dim()));
  detail::put_doubles(out, s.data().data(), static_cast<std::size_t>(s.data().size()));
  return out;
}

inline SampleSet samples_from_csv(std::string_view text, const std::string& name = "<csv>") {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  Index dim = -1;
  std::vector<double> values;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) {
      eol = text.size();
    }
    const std::string_view line = detail::trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty()) {
      continue;
    }
    const auto fields = detail::split(line, ',');
    const std::string where = name + ":" + std::to_string(line_no);
    if (dim < 0) {
      for (std::size_t d = 0; d < fields.size(); ++d) {
        if (fields[d] != "x" + std::to_string(d)) {
          throw IoError(where + ": expected header x0,...,x{D-1}");
        }
      }
      dim = static_cast<Index>(fields.size());
      continue;
    }
    if (static_cast<Index>(fields.size()) != dim) {
      throw IoError(where + ": expected " + std::to_string(dim) + " columns, got " + std::to_string(fields.size()));
    }
    for (const auto f : fields) {
      const double v = detail::parse_double(f, where);
      if (!std::isfinite(v)) {
        throw IoError(where + ": non-finite value");
      }
      values.push_back(v);
    }
  }
  if (dim < 0 || values.empty()) {
    throw IoError(name + ": no data rows");
  }
  const Index n = static_cast<Index>(values.size()) / dim;
  return SampleSet(Eigen::Map<const Matrix>(values.data(), n, dim));
}

inline SampleSet samples_from_binary(std::string_view bytes, const std::string& name = "<binary>") {
  if (bytes.substr(0, kDatasetMagic.size()) != kDatasetMagic) {
    throw IoError(name + ": bad magic");
  }
  std::size_t offset = kDatasetMagic.size();
  const auto n = detail::get<std::uint64_t>(bytes, offset, name);
  const auto d = detail::get<std::uint64_t>(bytes, offset, name);
  if (n == 0 || d == 0 || bytes.size() - offset != n * d * sizeof(double)) {
    throw IoError(name + ": header does not match payload size");
  }
  Matrix m(static_cast<Index>(n), static_cast<Index>(d));
  detail::get_doubles(bytes, offset, m.data(), static_cast<std::size_t>(n * d), name);
  if (!all_finite(m)) {
    throw IoError(name + ": non-finite value");
  }
  return SampleSet(std::move(m));
}

inline SampleSet load_samples(const DatasetFile& file) {
  const std::string bytes = detail::read_file(file.path);
  DatasetLayout layout = file.layout;
  if (layout == DatasetLayout::automatic) {
    layout = std::string_view(bytes).substr(0, kDatasetMagic.size()) == kDatasetMagic ? DatasetLayout::binary
                                                                                      : DatasetLayout::csv;
  }
  return layout == DatasetLayout::binary ? samples_from_binary(bytes, file.path.string())
                                         : samples_from_csv(bytes, file.path.string());
}

inline SampleSet load_samples(const std::filesystem::path& path) { return load_samples(DatasetFile{path}); }

/// Loads two files that must share a dimension.
inline std::pair<SampleSet, SampleSet> load_paired(const std::filesystem::path& a, const std::filesystem::path& b) {
  SampleSet x = load_samples(a);
  SampleSet y = load_samples(b);
  if (x.dim() != y.dim()) {
    throw DimensionError("dimension mismatch: " + a.string() + " has D=" + std::to_string(x.dim()) + ", " +
                         b.string() + " has D=" + std::to_string(y.dim()));
  }
  return {std::move(x), std::move(y)};
}

/// Layout chosen by extension: ".bin" writes binary, anything else CSV.
inline void save_samples(const std::filesystem::path& path, const SampleSet& s) {
  detail::write_file(path, path.extension() == ".bin" ? samples_to_binary(s) : samples_to_csv(s));
}

// ---------------------------------------------------------------------------
// Hashing

inline std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1) {
    throw Error("sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 0xF];
  }
  return out;
}

/// Digest of the binary serialization, so a binary file's own hash equals the
/// digest of the matrix it contains.
inline std::string content_digest(const SampleSet& s) { return sha256_hex(samples_to_binary(s)); }

inline std::string file_digest(const std::filesystem::path& path) { return sha256_hex(detail::read_file(path)); }

// ---------------------------------------------------------------------------
// Checkpoints

inline std::string checkpoint_to_json(const MixturePotential& pot) {
  std::ostringstream os;
  auto vec = [&](auto row) {
    os << '[';
    for (Index i = 0; i < row.size(); ++i) {
      os << (i ? ", " : "") << format_double(row[i]);
    }
    os << ']';
  };
  auto mat = [&](const Matrix& m) {
    os << "[\n";
    for (Index k = 0; k < m.rows(); ++k) {
      os << "    ";
      vec(m.row(k));
      os << (k + 1 < m.rows() ? ",\n" : "\n");
    }
    os << "  ]";
  };
  os << "{\n";
  os << "  \"format\": \"" << kCheckpointFormat << "\",\n";
  os << "  \"version\": " << kCheckpointVersion << ",\n";
  os << "  \"dim\": " << pot.dim() << ",\n";
  os << "  \"n_components\": " << pot.n_components() << ",\n";
  os << "  \"epsilon\": " << format_double(pot.epsilon()) << ",\n";
  os << "  \"log_weights\": ";
  vec(pot.log_weights());
  os << ",\n  \"means\": ";
  mat(pot.means());
  os << ",\n  \"log_scales\": ";
  mat(pot.log_scales());
  os << "\n}\n";
  return os.str();
}

inline MixturePotential checkpoint_from_json(std::string_view text, const std::string& name = "<checkpoint>") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(name + ": " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat || j.at("version").get<int>() != kCheckpointVersion) {
      throw IoError(name + ": unsupported checkpoint format or version");
    }
    const auto dim = j.at("dim").get<Index>();
    const auto k = j.at("n_components").get<Index>();
    const auto eps = j.at("epsilon").get<double>();
    const auto lw = j.at("log_weights").get<std::vector<double>>();
    const auto means = j.at("means").get<std::vector<std::vector<double>>>();
    const auto ls = j.at("log_scales").get<std::vector<std::vector<double>>>();
    if (dim < 1 || k < 1 || static_cast<Index>(lw.size()) != k || static_cast<Index>(means.size()) != k ||
        static_cast<Index>(ls.size()) != k) {
      throw IoError(name + ": inconsistent shapes");
    }
    Matrix m(k, dim);
    Matrix s(k, dim);
    for (Index r = 0; r < k; ++r) {
      const auto& mr = means[static_cast<std::size_t>(r)];
      const auto& sr = ls[static_cast<std::size_t>(r)];
      if (static_cast<Index>(mr.size()) != dim || static_cast<Index>(sr.size()) != dim) {
        throw IoError(name + ": inconsistent shapes");
      }
      for (Index d = 0; d < dim; ++d) {
        m(r, d) = mr[static_cast<std::size_t>(d)];
        s(r, d) = sr[static_cast<std::size_t>(d)];
      }
    }
    return {eps, Eigen::Map<const Vector>(lw.data(), k), std::move(m), std::move(s)};
  } catch (const nlohmann::json::exception& e) {
    throw IoError(name + ": " + e.what());
  }
}

inline void save_checkpoint(const std::filesystem::path& path, const MixturePotential& pot) {
  detail::write_file(path, checkpoint_to_json(pot));
}

inline MixturePotential load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(detail::read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// Trajectories

inline std::filesystem::path times_sidecar(const std::filesystem::path& path) {
  auto p = path;
  p.replace_extension(".times.csv");
  return p;
}

inline std::string trajectories_to_binary(const TrajectoryBatch& batch) {
  std::string out(kTrajectoryMagic);
  detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(batch.n_particles()));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(batch.n_times()));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(batch.dim));
  detail::put<double>(out, batch.epsilon);
  detail::put_doubles(out, batch.states.data(), static_cast<std::size_t>(batch.states.size()));
  return out;
}

inline std::string times_to_csv(const std::vector<double>& times) {
  std::string out = "t\n";
  for (const double t : times) {
    out += format_double(t) + '\n';
  }
  return out;
}

/// Writes `path` and its times sidecar.
inline void save_trajectories(const std::filesystem::path& path, const TrajectoryBatch& batch) {
  detail::write_file(path, trajectories_to_binary(batch));
  detail::write_file(times_sidecar(path), times_to_csv(batch.times));
}

inline TrajectoryBatch load_trajectories(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  const std::string name = path.string();
  if (std::string_view(bytes).substr(0, kTrajectoryMagic.size()) != kTrajectoryMagic) {
    throw IoError(name + ": bad magic");
  }
  std::size_t offset = kTrajectoryMagic.size();
  const auto p = detail::get<std::uint64_t>(bytes, offset, name);
  const auto t = detail::get<std::uint32_t>(bytes, offset, name);
  const auto d = detail::get<std::uint32_t>(bytes, offset, name);
  TrajectoryBatch batch;
  batch.epsilon = detail::get<double>(bytes, offset, name);
  batch.dim = d;
  if (bytes.size() - offset != p * t * d * sizeof(double)) {
    throw IoError(name + ": header does not match payload size");
  }
  batch.states.resize(static_cast<Index>(p), static_cast<Index>(t) * d);
  detail::get_doubles(bytes, offset, batch.states.data(), static_cast<std::size_t>(p * t * d), name);

  const std::string times_text = detail::read_file(times_sidecar(path));
  std::istringstream is(times_text);
  std::string line;
  std::getline(is, line);
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    const auto field = detail::trim(line);
    if (!field.empty()) {
      batch.times.push_back(detail::parse_double(field, times_sidecar(path).string() + ":" + std::to_string(line_no)));
    }
  }
  if (batch.times.size() != t) {
    throw IoError(name + ": times sidecar has " + std::to_string(batch.times.size()) + " entries, expected " +
                  std::to_string(t));
  }
  batch.validate();
  return batch;
}

/// Long-format CSV: particle,t,x0,...,x{D-1}.
inline std::string trajectories_to_csv(const TrajectoryBatch& batch) {
  std::string out = "particle,t";
  for (Index d = 0; d < batch.dim; ++d) {
    out += ",x" + std::to_string(d);
  }
  out += '\n';
  for (Index p = 0; p < batch.n_particles(); ++p) {
    for (Index j = 0; j < batch.n_times(); ++j) {
      out += std::to_string(p) + ',' + format_double(batch.times[static_cast<std::size_t>(j)]);
      const auto s = batch.state(p, j);
      for (Index d = 0; d < batch.dim; ++d) {
        out += ',' + format_double(s[d]);
      }
      out += '\n';
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Discrete plans

inline std::string plan_to_binary(const DiscretePlan& plan) {
  std::string out(kPlanMagic);
  detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(plan.support0.rows()));
  detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(plan.support1.rows()));
  detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(plan.support0.cols()));
  detail::put_doubles(out, plan.support0.data(), static_cast<std::size_t>(plan.support0.size()));
  detail::put_doubles(out, plan.support1.data(), static_cast<std::size_t>(plan.support1.size()));
  detail::put_doubles(out, plan.log_plan.data(), static_cast<std::size_t>(plan.log_plan.size()));
  return out;
}

inline DiscretePlan plan_from_binary(std::string_view bytes, const std::string& name = "<plan>") {
  if (bytes.substr(0, kPlanMagic.size()) != kPlanMagic) {
    throw IoError(name + ": bad magic");
  }
  std::size_t offset = kPlanMagic.size();
  const auto n = static_cast<Index>(detail::get<std::uint64_t>(bytes, offset, name));
  const auto m = static_cast<Index>(detail::get<std::uint64_t>(bytes, offset, name));
  const auto d = static_cast<Index>(detail::get<std::uint64_t>(bytes, offset, name));
  if (bytes.size() - offset != static_cast<std::size_t>(n * d + m * d + n * m) * sizeof(double)) {
    throw IoError(name + ": header does not match payload size");
  }
  DiscretePlan plan;
  plan.support0.resize(n, d);
  plan.support1.resize(m, d);
  plan.log_plan.resize(n, m);
  detail::get_doubles(bytes, offset, plan.support0.data(), static_cast<std::size_t>(n * d), name);
  detail::get_doubles(bytes, offset, plan.support1.data(), static_cast<std::size_t>(m * d), name);
  detail::get_doubles(bytes, offset, plan.log_plan.data(), static_cast<std::size_t>(n * m), name);
  return plan;
}

inline void save_plan(const std::filesystem::path& path, const DiscretePlan& plan) {
  detail::write_file(path, plan_to_binary(plan));
}

}  // namespace lightsb

#include "sgmcmc/io.hpp"

#include "sgmcmc/error.hpp"
#include "sgmcmc/rng.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

namespace sgmcmc {

namespace {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& bytes, std::string name)
      : bytes_(bytes), name_(std::move(name)) {}

  std::uint32_t u32() {
    require(4, "header");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | bytes_[pos_ + static_cast<std::size_t>(i)];
    pos_ += 4;
    return v;
  }

  const std::uint8_t* take(std::size_t n, const char* what) {
    require(n, what);
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::size_t offset() const { return pos_; }

  [[noreturn]] void fail(const std::string& msg, std::size_t at) const {
    std::ostringstream os;
    os << name_ << ": " << msg << " at byte offset " << at;
    throw FormatError(os.str(), at);
  }

 private:
  void require(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      fail(std::string("truncated ") + what + " (need " + std::to_string(n) + " bytes, have " +
               std::to_string(bytes_.size() - pos_) + ")",
           bytes_.size());
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

std::string hex32(std::uint32_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << std::setw(8) << std::setfill('0') << v;
  return os.str();
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 const IdxOptions& options) {
  const auto image_bytes = read_bytes(images);
  const auto label_bytes = read_bytes(labels);
  ByteReader img(image_bytes, images.filename().string());
  ByteReader lab(label_bytes, labels.filename().string());

  if (const auto magic = img.u32(); magic != kIdxImageMagic) {
    img.fail("bad image magic " + hex32(magic) + ", expected " + hex32(kIdxImageMagic), 0);
  }
  const std::size_t count = img.u32();
  const std::size_t rows = img.u32();
  const std::size_t cols = img.u32();

  if (const auto magic = lab.u32(); magic != kIdxLabelMagic) {
    lab.fail("bad label magic " + hex32(magic) + ", expected " + hex32(kIdxLabelMagic), 0);
  }
  const std::size_t label_count = lab.u32();
  if (label_count != count) {
    lab.fail("label count " + std::to_string(label_count) + " does not match image count " +
                 std::to_string(count),
             4);
  }

  const std::size_t pixels = rows * cols;
  const std::uint8_t* pix = img.take(count * pixels, "image payload");
  const std::uint8_t* lbl = lab.take(count, "label payload");

  std::vector<std::size_t> keep;
  keep.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!options.digits || lbl[i] == (*options.digits)[0] || lbl[i] == (*options.digits)[1]) {
      keep.push_back(i);
    }
  }

  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(pixels), static_cast<Eigen::Index>(keep.size()));
  out.labels.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    const std::size_t i = keep[j];
    const auto col = static_cast<Eigen::Index>(j);
    for (std::size_t k = 0; k < pixels; ++k) {
      out.features(static_cast<Eigen::Index>(k), col) = pix[i * pixels + k] / 255.0;
    }
    const int digit = lbl[i];
    if (options.digits) {
      out.labels(col) = digit == (*options.digits)[0] ? 1.0 : -1.0;
    } else {
      out.labels(col) = digit;
    }
  }
  return out;
}

namespace {

[[noreturn]] void libsvm_fail(const std::filesystem::path& path, std::size_t line,
                              const std::string& msg) {
  throw FormatError(path.filename().string() + ":" + std::to_string(line) + ": " + msg, line);
}

bool parse_double(std::string_view text, double& out) {
  if (text.empty()) return false;
  std::string buf(text);
  char* end = nullptr;
  errno = 0;
  out = std::strtod(buf.c_str(), &end);
  return end == buf.c_str() + buf.size() && errno == 0;
}

}  // namespace

Dataset load_libsvm(const std::filesystem::path& path, std::size_t min_dim) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());

  struct Row {
    double label;
    std::vector<std::pair<std::size_t, double>> entries;
  };
  std::vector<Row> rows;
  std::size_t max_index = 0;
  std::string line;
  std::size_t line_no = 0;
  std::unordered_set<std::size_t> seen;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream tokens(line);
    std::string tok;
    if (!(tokens >> tok)) continue;  // blank

    Row row;
    if (!parse_double(tok, row.label)) libsvm_fail(path, line_no, "bad label '" + tok + "'");
    seen.clear();
    while (tokens >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos) libsvm_fail(path, line_no, "expected index:value, got '" + tok + "'");
      std::size_t index = 0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + colon, index);
      if (ec != std::errc() || ptr != tok.data() + colon || index == 0) {
        libsvm_fail(path, line_no, "bad feature index in '" + tok + "'");
      }
      double value = 0.0;
      if (!parse_double(std::string_view(tok).substr(colon + 1), value) || !std::isfinite(value)) {
        libsvm_fail(path, line_no, "bad feature value in '" + tok + "'");
      }
      if (!seen.insert(index).second) {
        libsvm_fail(path, line_no, "duplicate feature index " + std::to_string(index));
      }
      max_index = std::max(max_index, index);
      row.entries.emplace_back(index - 1, value);
    }
    rows.push_back(std::move(row));
  }

  const std::size_t dim = std::max(max_index, min_dim);
  Dataset out;
  out.features = Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(rows.size()));
  out.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    out.labels(col) = rows[j].label;
    for (const auto& [k, v] : rows[j].entries) out.features(static_cast<Eigen::Index>(k), col) = v;
  }
  return out;
}

void write_libsvm(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(17);
  for (std::size_t j = 0; j < data.size(); ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    out << data.labels(col);
    for (Eigen::Index k = 0; k < data.features.rows(); ++k) {
      const double v = data.features(k, col);
      if (v != 0.0) out << ' ' << (k + 1) << ':' << v;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Matrix projection_matrix(std::size_t out_dim, std::size_t in_dim, std::uint64_t seed) {
  if (out_dim < 1) throw InvalidInput("random_projection: out_dim must be at least 1");
  Rng rng = make_rng(seed, 0x70726f6aULL);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(out_dim)));
  Matrix r(static_cast<Eigen::Index>(out_dim), static_cast<Eigen::Index>(in_dim));
  // Fill row by row so the stream order does not depend on storage order.
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    for (Eigen::Index j = 0; j < r.cols(); ++j) r(i, j) = normal(rng);
  }
  return r;
}

Dataset project(const Dataset& data, const Matrix& r) {
  if (static_cast<std::size_t>(r.cols()) != data.dim()) {
    throw InvalidInput("projection matrix columns do not match feature dimension");
  }
  Dataset out;
  out.features = r * data.features;
  out.labels = data.labels;
  return out;
}

Dataset random_projection(const Dataset& data, std::size_t out_dim, std::uint64_t seed) {
  return project(data, projection_matrix(out_dim, data.dim(), seed));
}

}  // namespace sgmcmc

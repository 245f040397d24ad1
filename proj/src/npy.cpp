#include "concept_forge/npy.hpp"

#include <bit>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>

namespace concept_forge {

static_assert(std::endian::native == std::endian::little, "NPY codec assumes a little-endian host");

std::size_t Tensor::size() const {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

namespace {

constexpr std::string_view kMagic = "\x93NUMPY";

/// Minimal reader for the Python dict literal numpy writes into the header.
class HeaderParser {
 public:
  explicit HeaderParser(std::string_view text) : text_(text) {}

  void parse(std::string& descr, bool& fortran, std::vector<std::size_t>& shape) {
    bool have_descr = false, have_fortran = false, have_shape = false;
    expect('{');
    while (true) {
      skip_ws();
      if (peek() == '}') {
        ++pos_;
        break;
      }
      std::string key = read_string();
      expect(':');
      if (key == "descr") {
        descr = read_string();
        have_descr = true;
      } else if (key == "fortran_order") {
        fortran = read_bool();
        have_fortran = true;
      } else if (key == "shape") {
        shape = read_shape();
        have_shape = true;
      } else {
        throw FormatError("npy: unexpected header key '" + key + "'");
      }
      skip_ws();
      if (peek() == ',') {
        ++pos_;
      } else if (peek() != '}') {
        throw FormatError("npy: malformed header dict");
      }
    }
    if (!have_descr || !have_fortran || !have_shape) {
      throw FormatError("npy: header is missing descr, fortran_order or shape");
    }
  }

 private:
  char peek() const {
    if (pos_ >= text_.size()) throw FormatError("npy: truncated header");
    return text_[pos_];
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  void expect(char c) {
    skip_ws();
    if (peek() != c) throw FormatError(std::string("npy: expected '") + c + "' in header");
    ++pos_;
  }

  std::string read_string() {
    skip_ws();
    const char quote = peek();
    if (quote != '\'' && quote != '"') throw FormatError("npy: expected string in header");
    ++pos_;
    const auto end = text_.find(quote, pos_);
    if (end == std::string_view::npos) throw FormatError("npy: unterminated string in header");
    std::string out(text_.substr(pos_, end - pos_));
    pos_ = end + 1;
    return out;
  }

  bool read_bool() {
    skip_ws();
    if (text_.substr(pos_, 4) == "True") {
      pos_ += 4;
      return true;
    }
    if (text_.substr(pos_, 5) == "False") {
      pos_ += 5;
      return false;
    }
    throw FormatError("npy: fortran_order must be True or False");
  }

  std::vector<std::size_t> read_shape() {
    expect('(');
    std::vector<std::size_t> dims;
    while (true) {
      skip_ws();
      if (peek() == ')') {
        ++pos_;
        return dims;
      }
      if (!std::isdigit(static_cast<unsigned char>(peek()))) throw FormatError("npy: bad shape tuple");
      std::size_t v = 0;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        v = v * 10 + static_cast<std::size_t>(text_[pos_] - '0');
        ++pos_;
      }
      dims.push_back(v);
      skip_ws();
      if (peek() == ',') ++pos_;
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

Tensor parse_npy(std::string_view bytes) {
  if (bytes.size() < 10 || bytes.substr(0, kMagic.size()) != kMagic) {
    throw FormatError("npy: bad magic string");
  }
  const auto major = static_cast<unsigned char>(bytes[6]);
  const auto minor = static_cast<unsigned char>(bytes[7]);
  if (major != 1 || minor != 0) {
    throw UnsupportedError("npy: only format version 1.0 is supported");
  }
  const std::size_t header_len =
      static_cast<unsigned char>(bytes[8]) | (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
  if (bytes.size() < 10 + header_len) throw FormatError("npy: truncated header");

  std::string descr;
  bool fortran = false;
  Tensor t;
  HeaderParser(bytes.substr(10, header_len)).parse(descr, fortran, t.shape);

  if (fortran) throw UnsupportedError("npy: Fortran-order arrays are not supported");
  std::size_t item = 0;
  if (descr == "<f4") {
    item = 4;
  } else if (descr == "<f8") {
    item = 8;
  } else {
    throw UnsupportedError("npy: unsupported dtype '" + descr + "'");
  }
  if (t.rank() != 2 && t.rank() != 4) {
    throw ShapeError("npy: expected a 2-D or 4-D array, got rank " + std::to_string(t.rank()));
  }

  const std::size_t count = t.size();
  const auto payload = bytes.substr(10 + header_len);
  if (payload.size() != count * item) {
    throw FormatError("npy: payload holds " + std::to_string(payload.size()) + " bytes, header implies " +
                      std::to_string(count * item));
  }
  t.values.resize(count);
  if (item == 8) {
    std::memcpy(t.values.data(), payload.data(), count * 8);
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      float f;
      std::memcpy(&f, payload.data() + i * 4, 4);
      t.values[i] = static_cast<double>(f);
    }
  }
  return t;
}

Tensor load_npy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_npy(buf.str());
}

std::string encode_npy(const RowMatrix& m) {
  std::ostringstream dict;
  dict << "{'descr': '<f8', 'fortran_order': False, 'shape': (" << m.rows() << ", " << m.cols() << "), }";
  std::string header = dict.str();
  // magic(6) + version(2) + length(2) + header + '\n' must be a multiple of 64
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header.push_back('\n');

  std::string out(kMagic);
  out.push_back('\x01');
  out.push_back('\x00');
  out.push_back(static_cast<char>(header.size() & 0xff));
  out.push_back(static_cast<char>((header.size() >> 8) & 0xff));
  out += header;
  const auto bytes = static_cast<std::size_t>(m.size()) * sizeof(double);
  const auto offset = out.size();
  out.resize(offset + bytes);
  if (bytes > 0) std::memcpy(out.data() + offset, m.data(), bytes);
  return out;
}

void save_npy(const std::filesystem::path& path, const RowMatrix& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  const auto bytes = encode_npy(m);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace concept_forge

#include "ceg/tensor_file.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace ceg {

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

namespace {

// Whitespace tokenizer that strips '#' comments and remembers line numbers.
class Tokenizer {
 public:
  Tokenizer(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  bool next(std::string& token) {
    while (pos_ >= tokens_.size()) {
      std::string line;
      if (!std::getline(in_, line)) return false;
      ++line_no_;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      std::istringstream ls(line);
      tokens_.clear();
      pos_ = 0;
      for (std::string tok; ls >> tok;) tokens_.push_back(tok);
    }
    token = tokens_[pos_++];
    return true;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(source_ + ":" + std::to_string(line_no_) + ": " + what);
  }

  std::string expect(const char* what) {
    std::string tok;
    if (!next(tok)) fail(std::string("unexpected end of file, expected ") + what);
    return tok;
  }

  std::size_t expect_size(const char* what) {
    auto tok = expect(what);
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      fail(std::string("expected ") + what + ", got '" + tok + "'");
    }
    return v;
  }

  double expect_double(const char* what) {
    auto tok = expect(what);
    double v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      fail(std::string("expected ") + what + ", got '" + tok + "'");
    }
    return v;
  }

 private:
  std::istream& in_;
  std::string source_;
  std::vector<std::string> tokens_;
  std::size_t pos_ = 0;
  std::size_t line_no_ = 0;
};

}  // namespace

TensorMap read_tensor_file(std::istream& in, const std::string& source) {
  Tokenizer tk(in, source);
  TensorMap out;
  std::string tok;
  while (tk.next(tok)) {
    if (tok != "tensor") tk.fail("expected 'tensor', got '" + tok + "'");
    std::string name = tk.expect("tensor name");
    if (out.contains(name)) tk.fail("duplicate tensor '" + name + "'");
    Tensor t;
    const std::size_t rank = tk.expect_size("rank");
    if (rank == 0 || rank > 8) tk.fail("tensor '" + name + "' has unsupported rank");
    for (std::size_t i = 0; i < rank; ++i) {
      t.shape.push_back(tk.expect_size("dimension"));
      if (t.shape.back() == 0) tk.fail("tensor '" + name + "' has a zero dimension");
    }
    const std::size_t n = t.element_count();
    t.data.reserve(n);
    for (std::size_t i = 0; i < n; ++i) t.data.push_back(tk.expect_double("tensor value"));
    out.emplace(std::move(name), std::move(t));
  }
  return out;
}

TensorMap load_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open tensor file " + path.string());
  return read_tensor_file(in, path.string());
}

void write_tensor_file(std::ostream& out, const TensorMap& tensors) {
  const auto old_precision = out.precision(17);
  for (const auto& [name, t] : tensors) {
    out << "tensor " << name << ' ' << t.rank();
    for (auto d : t.shape) out << ' ' << d;
    out << '\n';
    const std::size_t row = t.shape.back();
    for (std::size_t i = 0; i < t.data.size(); ++i) {
      out << t.data[i] << ((i + 1) % row == 0 ? '\n' : ' ');
    }
  }
  out.precision(old_precision);
}

void save_tensor_file(const std::filesystem::path& path, const TensorMap& tensors) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write tensor file " + path.string());
  write_tensor_file(out, tensors);
  if (!out) throw FormatError("write failed for " + path.string());
}

}  // namespace ceg

#include "ceg/confusion.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "ceg/tensor_file.hpp"

namespace ceg {

ConfusionMatrix::ConfusionMatrix() : m_{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}} {}

ConfusionMatrix ConfusionMatrix::normalized(const Raw& raw) {
  Raw m = raw;
  for (std::size_t col = 0; col < 3; ++col) {
    double sum = 0.0;
    for (std::size_t row = 0; row < 3; ++row) {
      if (!std::isfinite(raw[row][col]) || raw[row][col] < 0.0) {
        throw ValidationError("confusion matrix entry (" + std::to_string(row + 1) + ", " +
                              std::to_string(col + 1) + ") is negative or not finite");
      }
      sum += raw[row][col];
    }
    if (!(sum > 0.0)) {
      throw ValidationError("confusion matrix column " + std::to_string(col + 1) + " is empty");
    }
    for (std::size_t row = 0; row < 3; ++row) m[row][col] = raw[row][col] / sum;
  }
  return ConfusionMatrix(m);
}

// Percentages of images; columns sum to 100.1 / 100.0 / 100.0 as published.
ConfusionMatrix ConfusionMatrix::resnet() {
  return normalized({{{89.4, 4.6, 0.3}, {8.8, 92.9, 11.3}, {1.9, 2.5, 88.4}}});
}

// Columns sum to 100.0 / 100.0 / 99.9 as published.
ConfusionMatrix ConfusionMatrix::resnet_tfe() {
  return normalized({{{92.4, 2.5, 0.3}, {7.2, 93.1, 7.3}, {0.4, 4.4, 92.3}}});
}

ConfusionMatrix ConfusionMatrix::read(std::istream& in) {
  std::ostringstream clean;
  for (std::string line; std::getline(in, line);) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    clean << line << '\n';
  }
  std::istringstream values(clean.str());
  Raw raw{};
  for (auto& row : raw) {
    for (auto& v : row) {
      if (!(values >> v)) throw FormatError("confusion matrix file needs 9 numbers");
    }
  }
  std::string extra;
  if (values >> extra) throw FormatError("confusion matrix file has trailing data '" + extra + "'");
  return normalized(raw);
}

ConfusionMatrix ConfusionMatrix::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open confusion matrix file " + path.string());
  return read(in);
}

std::array<double, 3> ConfusionMatrix::column(GiClass truth) const {
  const auto c = slot(truth);
  return {m_[0][c], m_[1][c], m_[2][c]};
}

}  // namespace ceg

#include <fstream>
#include <unordered_map>

#include "stattn/data.hpp"
#include "stattn/error.hpp"
#include "text_util.hpp"

namespace stattn {

void write_sequences(const std::vector<FeatureSequence>& sequences, const std::filesystem::path& path) {
  if (sequences.empty()) fail(ErrorCode::kInvalidArgument, "write_sequences: nothing to write");
  const auto& names = sequences.front().feature_names;
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << "patient_id,step,label,clinical_risk";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (const auto& seq : sequences) {
    if (seq.feature_names != names) {
      fail(ErrorCode::kInvalidArgument, "write_sequences: patient '" + seq.patient_id + "' has different features");
    }
    for (std::size_t t = 0; t < seq.length(); ++t) {
      if (!seq.mask[t]) continue;
      out << seq.patient_id << ',' << t << ',' << seq.label << ',';
      if (seq.clinical_risk) out << text::format_double(*seq.clinical_risk);
      for (std::size_t j = 0; j < seq.width(); ++j) out << ',' << text::format_double(seq.matrix.at(t, j));
      out << '\n';
    }
  }
  if (!out) fail(ErrorCode::kIo, "failed writing " + path.string());
}

std::vector<FeatureSequence> read_sequences(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::kParse, path.string() + ": empty file");
  const auto header = text::split(line, ',');
  if (header.size() < 5 || header[0] != "patient_id" || header[1] != "step" || header[2] != "label" ||
      header[3] != "clinical_risk") {
    fail(ErrorCode::kParse, path.string() + ":1: expected patient_id,step,label,clinical_risk,<features>");
  }
  const std::vector<std::string> names(header.begin() + 4, header.end());
  const std::size_t width = names.size();

  struct Pending {
    FeatureSequence seq;
    std::vector<double> values;
  };
  std::vector<Pending> pending;
  std::unordered_map<std::string, std::size_t> index;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = text::split(line, ',');
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (fields.size() != header.size()) fail(ErrorCode::kParse, where + ": expected " + std::to_string(header.size()) + " fields");
    const auto step = text::parse_double(fields[1]);
    const auto label = text::parse_double(fields[2]);
    if (!label || (*label != 0.0 && *label != 1.0)) fail(ErrorCode::kParse, where + ": label must be 0 or 1");
    auto [it, fresh] = index.emplace(fields[0], pending.size());
    if (fresh) {
      Pending p;
      p.seq.patient_id = fields[0];
      p.seq.label = static_cast<int>(*label);
      p.seq.feature_names = names;
      if (!fields[3].empty()) {
        const auto risk = text::parse_double(fields[3]);
        if (!risk) fail(ErrorCode::kParse, where + ": unparseable clinical_risk");
        p.seq.clinical_risk = *risk;
      }
      pending.push_back(std::move(p));
    }
    auto& p = pending[it->second];
    if (!step || *step != static_cast<double>(p.seq.mask.size())) {
      fail(ErrorCode::kParse, where + ": steps of patient '" + fields[0] + "' must be consecutive from 0");
    }
    if (p.seq.label != static_cast<int>(*label)) fail(ErrorCode::kParse, where + ": label changes within a patient");
    for (std::size_t j = 0; j < width; ++j) {
      const auto v = text::parse_double(fields[4 + j]);
      if (!v) fail(ErrorCode::kParse, where + ": unparseable value in column '" + names[j] + "'");
      p.values.push_back(*v);
    }
    p.seq.mask.push_back(true);
  }
  std::vector<FeatureSequence> out;
  out.reserve(pending.size());
  for (auto& p : pending) {
    const std::size_t steps = p.seq.mask.size();
    p.seq.matrix = Tensor({steps, width}, std::move(p.values));
    out.push_back(std::move(p.seq));
  }
  if (out.empty()) fail(ErrorCode::kParse, path.string() + ": no rows");
  return out;
}

}  // namespace stattn

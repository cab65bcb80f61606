#include "agfn/data.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

namespace agfn {

namespace {

Vec random_unit_direction(Index dim, Rng& rng) {
  Vec u(dim);
  double norm = 0.0;
  // Degenerate all-zero draws are astronomically unlikely but cheap to reject.
  do {
    for (Index i = 0; i < dim; ++i) u(i) = rng.gaussian();
    norm = u.norm();
  } while (norm == 0.0);
  return u / norm;
}

void format_value(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  out += buf;
}

void append_matrix(std::string& out, const Mat& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      out += ',';
      format_value(out, m(i, j));
    }
  }
}

}  // namespace

Dataset generate(const SyntheticSpec& spec) {
  if (spec.n < 1) throw std::domain_error("generate: n must be >= 1");
  if (spec.seq_len < 1) throw std::domain_error("generate: seq_len must be >= 1");
  if (spec.d_text < 2 || spec.d_audio < 2 || spec.d_visual < 2)
    throw std::domain_error("generate: modality dims must be >= 2");
  if (spec.conflict_prob < 0.0 || spec.conflict_prob > 1.0)
    throw std::domain_error("generate: conflict_prob out of [0,1]");
  if (spec.missing_prob < 0.0 || spec.missing_prob > 1.0)
    throw std::domain_error("generate: missing_prob out of [0,1]");
  for (double s : spec.noise_std)
    if (s < 0.0) throw std::domain_error("generate: noise_std must be nonnegative");

  Rng rng(spec.seed);
  const std::array<Index, 3> dims = {spec.d_text, spec.d_audio, spec.d_visual};
  std::array<Vec, 3> directions;
  for (int m = 0; m < 3; ++m) directions[m] = random_unit_direction(dims[m], rng);

  Dataset ds;
  ds.d_text = spec.d_text;
  ds.d_audio = spec.d_audio;
  ds.d_visual = spec.d_visual;
  ds.seq_len = spec.seq_len;
  {
    std::ostringstream prov;
    prov << "synthetic seed=" << spec.seed << " n=" << spec.n;
    ds.provenance = prov.str();
  }
  ds.samples.reserve(static_cast<std::size_t>(spec.n));

  for (Index i = 0; i < spec.n; ++i) {
    ModalityBundle b;
    {
      char idbuf[24];
      std::snprintf(idbuf, sizeof(idbuf), "s%06" PRId64, static_cast<std::int64_t>(i));
      b.sample_id = idbuf;
    }
    const double s = rng.uniform(-3.0, 3.0);
    b.label = s;

    if (rng.uniform01() < spec.conflict_prob) {
      b.conflict_modality = static_cast<int>(rng.index(3));
    } else if (rng.uniform01() < spec.missing_prob) {
      b.missing_modality = static_cast<int>(rng.index(3));
    }

    std::array<Mat*, 3> seqs = {&b.text, &b.audio, &b.visual};
    for (int m = 0; m < 3; ++m) {
      const double sign = (b.conflict_modality == m) ? -1.0 : 1.0;
      Mat& seq = *seqs[m];
      seq.resize(spec.seq_len, dims[static_cast<std::size_t>(m)]);
      for (Index r = 0; r < spec.seq_len; ++r) {
        for (Index c = 0; c < dims[static_cast<std::size_t>(m)]; ++c) {
          seq(r, c) = sign * s * directions[static_cast<std::size_t>(m)](c) +
                      rng.gaussian(0.0, spec.noise_std[static_cast<std::size_t>(m)]);
        }
      }
      if (b.missing_modality == m) seq.setZero();
    }
    ds.samples.push_back(std::move(b));
  }
  return ds;
}

SplitView split(const Dataset& ds, std::uint64_t seed) {
  const Index n = ds.size();
  if (n < 10) throw DataError("split: need at least 10 samples");

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(seed);
  rng.shuffle(order);

  const Index n_train = static_cast<Index>(0.7 * static_cast<double>(n));
  const Index n_val = static_cast<Index>(0.1 * static_cast<double>(n));

  SplitView sv;
  sv.train.assign(order.begin(), order.begin() + n_train);
  sv.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  sv.test.assign(order.begin() + n_train + n_val, order.end());
  return sv;
}

Dataset subset(const Dataset& ds, const std::vector<Index>& indices) {
  Dataset out;
  out.d_text = ds.d_text;
  out.d_audio = ds.d_audio;
  out.d_visual = ds.d_visual;
  out.seq_len = ds.seq_len;
  out.provenance = ds.provenance;
  out.samples.reserve(indices.size());
  for (Index i : indices) out.samples.push_back(ds.samples[static_cast<std::size_t>(i)]);
  return out;
}

void save_csv(const Dataset& ds, const std::string& path) {
  std::string buf;
  {
    char header[128];
    std::snprintf(header, sizeof(header), "#agfn-features v1 dT=%lld dA=%lld dV=%lld seq=%lld\n",
                  static_cast<long long>(ds.d_text), static_cast<long long>(ds.d_audio),
                  static_cast<long long>(ds.d_visual), static_cast<long long>(ds.seq_len));
    buf += header;
  }
  for (const ModalityBundle& b : ds.samples) {
    buf += b.sample_id;
    buf += ',';
    format_value(buf, b.label);
    append_matrix(buf, b.text);
    append_matrix(buf, b.audio);
    append_matrix(buf, b.visual);
    buf += '\n';
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("save_csv: cannot open '" + path + "' for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("save_csv: write to '" + path + "' failed");
}

namespace {

[[noreturn]] void parse_fail(const std::string& path, long line, const std::string& what) {
  std::ostringstream msg;
  msg << path << ":" << line << ": " << what;
  throw DataError(msg.str());
}

double parse_double(const std::string& path, long line, const std::string& field) {
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (end == field.c_str() || *end != '\0') parse_fail(path, line, "malformed number '" + field + "'");
  if (!std::isfinite(v)) parse_fail(path, line, "non-finite value '" + field + "'");
  return v;
}

}  // namespace

Dataset load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("load_csv: cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) parse_fail(path, 1, "empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  Dataset ds;
  {
    long long dt = 0, da = 0, dv = 0, seq = 0;
    if (std::sscanf(line.c_str(), "#agfn-features v1 dT=%lld dA=%lld dV=%lld seq=%lld", &dt, &da, &dv,
                    &seq) != 4) {
      parse_fail(path, 1, "malformed header (expected '#agfn-features v1 dT=. dA=. dV=. seq=.')");
    }
    if (dt < 1 || da < 1 || dv < 1 || seq < 1) parse_fail(path, 1, "header dims must be positive");
    ds.d_text = dt;
    ds.d_audio = da;
    ds.d_visual = dv;
    ds.seq_len = seq;
  }
  ds.provenance = path;

  const std::size_t expected_fields =
      2 + static_cast<std::size_t>(ds.seq_len * (ds.d_text + ds.d_audio + ds.d_visual));

  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::vector<std::string> fields;
    fields.reserve(expected_fields);
    std::size_t start = 0;
    while (true) {
      const std::size_t pos = line.find(',', start);
      if (pos == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, pos - start));
      start = pos + 1;
    }
    if (fields.size() != expected_fields) {
      std::ostringstream msg;
      msg << "expected " << expected_fields << " fields, got " << fields.size();
      parse_fail(path, line_no, msg.str());
    }

    ModalityBundle b;
    b.sample_id = fields[0];
    if (b.sample_id.empty()) parse_fail(path, line_no, "empty sample id");
    b.label = parse_double(path, line_no, fields[1]);
    if (b.label < -3.0 || b.label > 3.0) parse_fail(path, line_no, "label out of [-3, 3]");

    std::size_t next = 2;
    auto read_matrix = [&](Index rows, Index cols) {
      Mat m(rows, cols);
      for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = parse_double(path, line_no, fields[next++]);
      return m;
    };
    b.text = read_matrix(ds.seq_len, ds.d_text);
    b.audio = read_matrix(ds.seq_len, ds.d_audio);
    b.visual = read_matrix(ds.seq_len, ds.d_visual);
    ds.samples.push_back(std::move(b));
  }
  if (ds.samples.empty()) parse_fail(path, line_no, "no data rows");
  return ds;
}

}  // namespace agfn

#include "awe/rsa.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "awe/error.hpp"

namespace awe::rsa {

using nn::Tensor;

namespace {

void check_pair(const Tensor& x, const Tensor& y) {
  if (x.rank() != 2 || y.rank() != 2) throw DimensionError("CKA expects D x N matrices");
  if (x.cols() != y.cols()) {
    throw DimensionError("CKA: views hold " + std::to_string(x.cols()) + " and " + std::to_string(y.cols()) +
                         " stimuli");
  }
  if (x.cols() < 2) throw DimensionError("CKA needs at least 2 stimuli");
  nn::require_finite(x, "CKA input");
  nn::require_finite(y, "CKA input");
}

Tensor center_features(const Tensor& x) {
  Tensor c = x;
  const std::size_t n = x.cols();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto row = c.row(i);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(n);
    for (double& v : row) v -= mean;
  }
  return c;
}

double frob2(const Tensor& t) {
  double s = 0.0;
  for (double v : t.values()) s += v * v;
  return s;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// N x N squared Euclidean distances between columns.
Tensor squared_distances(const Tensor& x) {
  const std::size_t n = x.cols();
  const Tensor xt = nn::transpose(x);
  Tensor d2(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = xt.row(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto b = xt.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) {
        const double diff = a[k] - b[k];
        s += diff * diff;
      }
      d2(i, j) = s;
      d2(j, i) = s;
    }
  }
  return d2;
}

double median_of_upper(const Tensor& d2) {
  const std::size_t n = d2.rows();
  std::vector<double> d;
  d.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) d.push_back(std::sqrt(d2(i, j)));
  }
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  const double upper = d[mid];
  if (d.size() % 2 == 1) return upper;
  const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

// Doubly centered Gaussian kernel matrix.
Tensor centered_rbf(const Tensor& x, double fraction) {
  const Tensor d2 = squared_distances(x);
  const double sigma = fraction * median_of_upper(d2);
  if (!(sigma > 0.0)) throw DegenerateInputError("RBF CKA: median pairwise distance is zero");
  const std::size_t n = d2.rows();
  Tensor k(n, n);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (std::size_t i = 0; i < k.size(); ++i) k[i] = std::exp(-d2[i] * inv);
  std::vector<double> mean(n, 0.0);
  double grand = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) mean[i] += k(i, j);
    grand += mean[i];
    mean[i] /= static_cast<double>(n);
  }
  grand /= static_cast<double>(n * n);
  // K is symmetric, so row and column means coincide.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) k(i, j) = k(i, j) - mean[i] - mean[j] + grand;
  }
  return k;
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

double linear_cka(const Tensor& x, const Tensor& y) {
  check_pair(x, y);
  const Tensor xc = center_features(x);
  const Tensor yc = center_features(y);
  Tensor cross;
  Tensor xx;
  Tensor yy;
  nn::gemm_nt(xc, yc, cross);
  nn::gemm_nt(xc, xc, xx);
  nn::gemm_nt(yc, yc, yy);
  const double nx = std::sqrt(frob2(xx));
  const double ny = std::sqrt(frob2(yy));
  if (!(nx > 0.0) || !(ny > 0.0)) throw DegenerateInputError("linear CKA: representation has zero variance");
  return clamp01(frob2(cross) / (nx * ny));
}

double median_pairwise_distance(const Tensor& x) {
  if (x.rank() != 2 || x.cols() < 2) throw DimensionError("median pairwise distance needs >= 2 columns");
  return median_of_upper(squared_distances(x));
}

double rbf_cka(const Tensor& x, const Tensor& y, double bandwidth_fraction) {
  if (!(bandwidth_fraction > 0.0) || !std::isfinite(bandwidth_fraction)) {
    throw ConfigError("RBF bandwidth fraction must be > 0");
  }
  check_pair(x, y);
  const Tensor k = centered_rbf(x, bandwidth_fraction);
  const Tensor l = centered_rbf(y, bandwidth_fraction);
  const double kk = dot(k, k);
  const double ll = dot(l, l);
  if (!(kk > 0.0) || !(ll > 0.0)) throw DegenerateInputError("RBF CKA: centered kernel is zero");
  return clamp01(dot(k, l) / std::sqrt(kk * ll));
}

std::string Kernel::tag() const {
  if (kind == Kind::Linear) return "linear";
  return "rbf(" + format_number(bandwidth_fraction) + ")";
}

Kernel Kernel::parse(std::string_view tag) {
  if (tag == "linear") return linear();
  if (tag == "rbf") return rbf();
  if (tag.size() > 5 && tag.substr(0, 4) == "rbf(" && tag.back() == ')') {
    const std::string_view num = tag.substr(4, tag.size() - 5);
    double f = 0.0;
    auto res = std::from_chars(num.data(), num.data() + num.size(), f);
    if (res.ec == std::errc() && res.ptr == num.data() + num.size() && f > 0.0) return rbf(f);
  }
  throw ConfigError("unknown kernel '" + std::string(tag) + "' (expected linear or rbf(<fraction>))");
}

double cka(const Tensor& x, const Tensor& y, const Kernel& kernel) {
  return kernel.kind == Kernel::Kind::Linear ? linear_cka(x, y) : rbf_cka(x, y, kernel.bandwidth_fraction);
}

double sim(const EmbeddingMatrix& native, const EmbeddingMatrix& foreign, const Kernel& kernel) {
  if (native.stimuli_language != native.encoder_language) {
    throw DataError("sim: native view has stimuli '" + native.stimuli_language + "' but encoder '" +
                    native.encoder_language + "'");
  }
  if (foreign.stimuli_language != native.stimuli_language) {
    throw DataError("sim: foreign view holds stimuli of '" + foreign.stimuli_language + "', expected '" +
                    native.stimuli_language + "'");
  }
  if (foreign.objective != native.objective) throw DataError("sim: views come from different objectives");
  if (foreign.ids != native.ids) throw DataError("sim: views list different stimuli");
  return cka(native.values, foreign.values, kernel);
}

double sim(const std::string& stimuli_language, std::span<const enc::Stimulus> stimuli,
           const enc::EncoderModel& native, const enc::EncoderModel& foreign, const Kernel& kernel) {
  if (native.language != stimuli_language) {
    throw DataError("sim: native encoder is trained on '" + native.language + "', stimuli are '" +
                    stimuli_language + "'");
  }
  return sim(enc::embed_set(native, stimuli, stimuli_language), enc::embed_set(foreign, stimuli, stimuli_language),
             kernel);
}

void ViewTable::add(EmbeddingMatrix view) {
  view.validate();
  auto key = std::make_tuple(view.stimuli_language, view.encoder_language, view.objective);
  views_.insert_or_assign(std::move(key), std::move(view));
}

bool ViewTable::contains(const std::string& stimuli, const std::string& encoder, Objective objective) const {
  return views_.count(std::make_tuple(stimuli, encoder, objective)) != 0;
}

const EmbeddingMatrix& ViewTable::get(const std::string& stimuli, const std::string& encoder,
                                      Objective objective) const {
  auto it = views_.find(std::make_tuple(stimuli, encoder, objective));
  if (it == views_.end()) {
    throw NotFoundError("no " + std::string(to_string(objective)) + " embeddings of '" + stimuli +
                        "' stimuli from the '" + encoder + "' encoder");
  }
  return it->second;
}

std::size_t XRSM::index_of(std::string_view language) const {
  for (std::size_t i = 0; i < languages.size(); ++i) {
    if (languages[i] == language) return i;
  }
  throw NotFoundError("language '" + std::string(language) + "' not in xRSM");
}

XRSM build_xrsm(std::span<const std::string> languages, const ViewTable& views, Objective objective,
                const Kernel& kernel) {
  const std::size_t m = languages.size();
  if (m < 2) throw ConfigError("an xRSM needs at least 2 languages");
  XRSM out;
  out.languages.assign(languages.begin(), languages.end());
  out.objective = objective;
  out.kernel = kernel;
  out.values = Tensor(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    const EmbeddingMatrix& native = views.get(languages[i], languages[i], objective);
    out.stimuli_sizes.push_back(native.count());
    for (std::size_t j = 0; j < m; ++j) {
      const double v = sim(native, views.get(languages[i], languages[j], objective), kernel);
      if (i == j) {
        if (std::abs(v - 1.0) > 1e-9) {
          throw NumericError("xRSM diagonal for '" + languages[i] + "' is " + format_number(v) + ", expected 1");
        }
        out.values(i, j) = 1.0;
      } else {
        out.values(i, j) = v;
      }
    }
  }
  return out;
}

XRSM build_xrsm(std::span<const enc::EncoderModel> encoders, std::span<const StimulusSet> stimuli,
                const Kernel& kernel) {
  if (encoders.size() != stimuli.size()) {
    throw DataError("build_xrsm: " + std::to_string(encoders.size()) + " encoders for " +
                    std::to_string(stimuli.size()) + " stimulus sets");
  }
  if (encoders.empty()) throw ConfigError("an xRSM needs at least 2 languages");
  const Objective objective = encoders.front().config.objective;
  std::vector<std::string> languages;
  for (const auto& s : stimuli) languages.push_back(s.language);
  ViewTable views;
  for (const auto& s : stimuli) {
    bool found = false;
    for (const auto& e : encoders) {
      if (e.config.objective != objective) throw DataError("build_xrsm: encoders mix objectives");
      found = found || e.language == s.language;
      views.add(enc::embed_set(e, s.items, s.language));
    }
    if (!found) throw NotFoundError("build_xrsm: no encoder trained on '" + s.language + "'");
  }
  return build_xrsm(languages, views, objective, kernel);
}

std::string CrossModelTable::pair_name(std::size_t pair) {
  return std::string(to_string(kPairObjectives[pair][0])) + "-" + std::string(to_string(kPairObjectives[pair][1]));
}

CrossModelTable cross_model_table(std::span<const std::string> languages, const ViewTable& views,
                                  const Kernel& kernel) {
  if (languages.empty()) throw ConfigError("cross-model table needs at least one language");
  CrossModelTable t;
  t.languages.assign(languages.begin(), languages.end());
  t.kernel = kernel;
  for (const auto& lang : languages) {
    std::array<double, CrossModelTable::kPairs> row{};
    for (std::size_t p = 0; p < CrossModelTable::kPairs; ++p) {
      const EmbeddingMatrix& a = views.get(lang, lang, CrossModelTable::kPairObjectives[p][0]);
      const EmbeddingMatrix& b = views.get(lang, lang, CrossModelTable::kPairObjectives[p][1]);
      if (a.ids != b.ids) throw DataError("cross-model table: views of '" + lang + "' list different stimuli");
      row[p] = cka(a.values, b.values, kernel);
      t.means[p] += row[p];
    }
    t.values.push_back(row);
  }
  for (double& m : t.means) m /= static_cast<double>(languages.size());
  return t;
}

std::string xrsm_to_csv(const XRSM& m) {
  std::ostringstream os;
  os << "stimuli\\encoder";
  for (const auto& l : m.languages) os << ',' << l;
  os << '\n';
  for (std::size_t i = 0; i < m.languages.size(); ++i) {
    os << m.languages[i];
    for (std::size_t j = 0; j < m.languages.size(); ++j) os << ',' << format_number(m(i, j));
    os << '\n';
  }
  return os.str();
}

std::string xrsm_to_json(const XRSM& m) {
  nlohmann::json values = nlohmann::json::array();
  for (std::size_t i = 0; i < m.languages.size(); ++i) {
    std::vector<double> row(m.values.row(i).begin(), m.values.row(i).end());
    values.push_back(row);
  }
  nlohmann::json j{{"objective", to_string(m.objective)},
                   {"kernel", m.kernel.tag()},
                   {"seed", m.seed},
                   {"languages", m.languages},
                   {"rows", "stimuli language"},
                   {"columns", "encoder language"},
                   {"stimuli_sizes", m.stimuli_sizes},
                   {"values", values}};
  return j.dump(1);
}

XRSM xrsm_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    XRSM m;
    m.objective = parse_objective(j.at("objective").get<std::string>());
    m.kernel = Kernel::parse(j.at("kernel").get<std::string>());
    m.seed = j.at("seed").get<std::uint64_t>();
    m.languages = j.at("languages").get<std::vector<std::string>>();
    m.stimuli_sizes = j.at("stimuli_sizes").get<std::vector<std::size_t>>();
    const auto rows = j.at("values").get<std::vector<std::vector<double>>>();
    const std::size_t n = m.languages.size();
    if (rows.size() != n) throw FormatError("xRSM JSON: value rows do not match languages");
    m.values = Tensor(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      if (rows[i].size() != n) throw FormatError("xRSM JSON: row " + std::to_string(i) + " has wrong length");
      for (std::size_t k = 0; k < n; ++k) m.values(i, k) = rows[i][k];
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("xRSM JSON: ") + e.what());
  }
}

namespace {

struct Rgb {
  double r, g, b;
};

// White-yellow-orange-red ramp.
Rgb warm(double t) {
  static constexpr Rgb stops[] = {
      {255, 255, 204}, {254, 217, 118}, {253, 141, 60}, {227, 26, 28}, {128, 0, 38}};
  t = std::clamp(t, 0.0, 1.0) * 4.0;
  const auto i = std::min<std::size_t>(3, static_cast<std::size_t>(t));
  const double f = t - static_cast<double>(i);
  return {stops[i].r + f * (stops[i + 1].r - stops[i].r), stops[i].g + f * (stops[i + 1].g - stops[i].g),
          stops[i].b + f * (stops[i + 1].b - stops[i].b)};
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_xrsm_svg(const XRSM& m) {
  const std::size_t n = m.languages.size();
  constexpr double cell = 56.0;
  constexpr double left = 90.0;
  constexpr double top = 60.0;
  const double width = left + cell * static_cast<double>(n) + 20.0;
  const double height = top + cell * static_cast<double>(n) + 50.0;
  double lo = 1.0;
  double hi = 0.0;
  for (double v : m.values.values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double span = hi > lo ? hi - lo : 1.0;

  std::ostringstream os;
  char buf[256];
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                "font-family=\"sans-serif\" font-size=\"12\">\n",
                width, height);
  os << buf;
  os << "<title>" << xml_escape(std::string(to_string(m.objective)) + " xRSM, " + m.kernel.tag()) << "</title>\n";
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double v = m(i, j);
      const Rgb c = warm((v - lo) / span);
      const double x = left + cell * static_cast<double>(j);
      const double y = top + cell * static_cast<double>(i);
      std::snprintf(buf, sizeof buf,
                    "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"rgb(%d,%d,%d)\"/>\n", x, y,
                    cell, cell, static_cast<int>(std::lround(c.r)), static_cast<int>(std::lround(c.g)),
                    static_cast<int>(std::lround(c.b)));
      os << buf;
      const bool dark = (v - lo) / span > 0.6;
      std::snprintf(buf, sizeof buf,
                    "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\" dominant-baseline=\"middle\" "
                    "fill=\"%s\">%.3f</text>\n",
                    x + cell / 2, y + cell / 2, dark ? "white" : "black", v);
      os << buf;
    }
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\" dominant-baseline=\"middle\">",
                  left - 8, top + cell * (static_cast<double>(i) + 0.5));
    os << buf << xml_escape(m.languages[i]) << "</text>\n";
  }
  for (std::size_t j = 0; j < n; ++j) {
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">",
                  left + cell * (static_cast<double>(j) + 0.5), top - 10);
    os << buf << xml_escape(m.languages[j]) << "</text>\n";
  }
  std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">encoder language</text>\n",
                left + cell * static_cast<double>(n) / 2, top - 32);
  os << buf;
  std::snprintf(buf, sizeof buf,
                "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\" transform=\"rotate(-90 %.1f %.1f)\">"
                "stimuli language</text>\n",
                20.0, top + cell * static_cast<double>(n) / 2, 20.0, top + cell * static_cast<double>(n) / 2);
  os << buf;
  os << "</svg>\n";
  return os.str();
}

std::string cross_model_to_csv(const CrossModelTable& t) {
  std::ostringstream os;
  os << "language";
  for (std::size_t p = 0; p < CrossModelTable::kPairs; ++p) os << ',' << CrossModelTable::pair_name(p);
  os << '\n';
  for (std::size_t i = 0; i < t.languages.size(); ++i) {
    os << t.languages[i];
    for (double v : t.values[i]) os << ',' << format_number(v);
    os << '\n';
  }
  os << "mean";
  for (double v : t.means) os << ',' << format_number(v);
  os << '\n';
  return os.str();
}

std::string cross_model_to_json(const CrossModelTable& t) {
  nlohmann::json per = nlohmann::json::object();
  for (std::size_t i = 0; i < t.languages.size(); ++i) {
    nlohmann::json row = nlohmann::json::object();
    for (std::size_t p = 0; p < CrossModelTable::kPairs; ++p) row[CrossModelTable::pair_name(p)] = t.values[i][p];
    per[t.languages[i]] = row;
  }
  nlohmann::json means = nlohmann::json::object();
  for (std::size_t p = 0; p < CrossModelTable::kPairs; ++p) means[CrossModelTable::pair_name(p)] = t.means[p];
  return nlohmann::json{{"kernel", t.kernel.tag()}, {"languages", per}, {"means", means}}.dump(1);
}

}  // namespace awe::rsa

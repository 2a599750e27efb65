#include "awe/cluster.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include "awe/error.hpp"

namespace awe::cluster {

void MergeTree::validate() const {
  const std::size_t m = labels.size();
  if (m < 2) throw DataError("merge tree needs at least 2 leaves");
  if (merges.size() != m - 1) {
    throw DataError("merge tree over " + std::to_string(m) + " leaves has " + std::to_string(merges.size()) +
                    " merges");
  }
  std::vector<std::size_t> size(2 * m - 1, 0);
  std::vector<bool> used(2 * m - 1, false);
  for (std::size_t i = 0; i < m; ++i) size[i] = 1;
  double last = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < merges.size(); ++i) {
    const Merge& g = merges[i];
    const std::size_t id = m + i;
    if (g.a >= id || g.b >= id || g.a == g.b || used[g.a] || used[g.b]) {
      throw DataError("merge " + std::to_string(i) + " joins unavailable clusters");
    }
    if (!std::isfinite(g.height) || g.height < last) {
      throw DataError("merge heights must be finite and nondecreasing");
    }
    if (g.size != size[g.a] + size[g.b]) throw DataError("merge " + std::to_string(i) + " has a wrong size");
    used[g.a] = used[g.b] = true;
    size[id] = g.size;
    last = g.height;
  }
}

std::vector<std::size_t> MergeTree::leaf_order() const {
  std::vector<std::size_t> out;
  const std::size_t m = labels.size();
  std::vector<std::size_t> stack{root()};
  while (!stack.empty()) {
    const std::size_t id = stack.back();
    stack.pop_back();
    if (id < m) {
      out.push_back(id);
    } else {
      stack.push_back(merges[id - m].b);
      stack.push_back(merges[id - m].a);
    }
  }
  return out;
}

std::vector<std::size_t> MergeTree::members(std::size_t id) const {
  std::vector<std::size_t> out;
  const std::size_t m = labels.size();
  std::vector<std::size_t> stack{id};
  while (!stack.empty()) {
    const std::size_t c = stack.back();
    stack.pop_back();
    if (c < m) {
      out.push_back(c);
    } else {
      stack.push_back(merges[c - m].a);
      stack.push_back(merges[c - m].b);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

MergeTree ward_linkage(const nn::Tensor& points, std::vector<std::string> labels) {
  const std::size_t m = points.rows();
  if (points.rank() != 2 || m < 2) throw DimensionError("ward_linkage needs at least 2 rows");
  if (labels.size() != m) {
    throw DimensionError("ward_linkage: " + std::to_string(labels.size()) + " labels for " + std::to_string(m) +
                         " points");
  }
  nn::require_finite(points, "ward_linkage input");

  const std::size_t total = 2 * m - 1;
  std::vector<double> d(total * total, 0.0);
  auto at = [&](std::size_t i, std::size_t j) -> double& { return d[i * total + j]; };
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < points.cols(); ++k) {
        const double diff = points(i, k) - points(j, k);
        s += diff * diff;
      }
      at(i, j) = at(j, i) = std::sqrt(s);
    }
  }
  std::vector<std::size_t> size(total, 0);
  std::fill(size.begin(), size.begin() + static_cast<std::ptrdiff_t>(m), 1);
  std::vector<std::size_t> active(m);
  for (std::size_t i = 0; i < m; ++i) active[i] = i;

  MergeTree tree;
  tree.labels = std::move(labels);
  for (std::size_t step = 0; step + 1 < m; ++step) {
    // Active ids stay ascending, so the first strict minimum is the
    // lexicographically smallest tied pair.
    std::size_t ba = 0;
    std::size_t bb = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t x = 0; x < active.size(); ++x) {
      for (std::size_t y = x + 1; y < active.size(); ++y) {
        const double v = at(active[x], active[y]);
        if (v < best) {
          best = v;
          ba = active[x];
          bb = active[y];
        }
      }
    }
    const std::size_t id = m + step;
    size[id] = size[ba] + size[bb];
    const double ni = static_cast<double>(size[ba]);
    const double nj = static_cast<double>(size[bb]);
    for (std::size_t k : active) {
      if (k == ba || k == bb) continue;
      const double nk = static_cast<double>(size[k]);
      const double dik = at(ba, k);
      const double djk = at(bb, k);
      const double v = ((ni + nk) * dik * dik + (nj + nk) * djk * djk - nk * best * best) / (ni + nj + nk);
      at(id, k) = at(k, id) = std::sqrt(std::max(0.0, v));
    }
    std::erase_if(active, [&](std::size_t k) { return k == ba || k == bb; });
    active.push_back(id);
    tree.merges.push_back({ba, bb, best, size[id]});
  }
  return tree;
}

namespace {

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

bool needs_quotes(std::string_view label) {
  if (label.empty()) return true;
  return label.find_first_of("()[],:;' \t\n") != std::string_view::npos;
}

std::string newick_label(std::string_view label) {
  if (!needs_quotes(label)) return std::string(label);
  std::string out = "'";
  for (char c : label) {
    if (c == '\'') out += '\'';
    out += c;
  }
  return out + "'";
}

}  // namespace

std::string to_newick(const MergeTree& tree) {
  tree.validate();
  const std::size_t m = tree.leaves();
  auto height = [&](std::size_t id) { return id < m ? 0.0 : tree.merges[id - m].height; };
  std::function<void(std::size_t, double, std::string&)> emit = [&](std::size_t id, double parent,
                                                                     std::string& out) {
    if (id < m) {
      out += newick_label(tree.labels[id]);
    } else {
      const Merge& g = tree.merges[id - m];
      out += '(';
      emit(g.a, g.height, out);
      out += ',';
      emit(g.b, g.height, out);
      out += ')';
    }
    if (parent >= 0.0) out += ":" + format_number(parent - height(id));
  };
  std::string out;
  emit(tree.root(), -1.0, out);
  return out + ";";
}

namespace {

struct ParsedNode {
  std::string label;
  double length = 0.0;
  std::vector<std::size_t> children;
};

class NewickParser {
 public:
  explicit NewickParser(std::string_view text) : s_(text) {}

  std::vector<ParsedNode> parse(std::size_t& root) {
    root = node();
    skip_ws();
    if (pos_ >= s_.size() || s_[pos_] != ';') fail("expected ';'");
    ++pos_;
    skip_ws();
    if (pos_ != s_.size()) fail("trailing characters");
    return std::move(nodes_);
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError("Newick parse error at offset " + std::to_string(pos_) + ": " + what);
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  std::size_t node() {
    skip_ws();
    ParsedNode n;
    if (pos_ < s_.size() && s_[pos_] == '(') {
      ++pos_;
      n.children.push_back(node());
      skip_ws();
      while (pos_ < s_.size() && s_[pos_] == ',') {
        ++pos_;
        n.children.push_back(node());
        skip_ws();
      }
      if (pos_ >= s_.size() || s_[pos_] != ')') fail("expected ')'");
      ++pos_;
      if (n.children.size() != 2) fail("only binary trees are supported");
    }
    skip_ws();
    n.label = label();
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == ':') {
      ++pos_;
      skip_ws();
      const char* begin = s_.data() + pos_;
      auto res = std::from_chars(begin, s_.data() + s_.size(), n.length);
      if (res.ec != std::errc()) fail("bad branch length");
      pos_ += static_cast<std::size_t>(res.ptr - begin);
    }
    if (n.children.empty() && n.label.empty()) fail("unnamed leaf");
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
  }

  std::string label() {
    std::string out;
    if (pos_ < s_.size() && s_[pos_] == '\'') {
      ++pos_;
      while (true) {
        if (pos_ >= s_.size()) fail("unterminated quoted label");
        if (s_[pos_] == '\'') {
          if (pos_ + 1 < s_.size() && s_[pos_ + 1] == '\'') {
            out += '\'';
            pos_ += 2;
            continue;
          }
          ++pos_;
          break;
        }
        out += s_[pos_++];
      }
      return out;
    }
    while (pos_ < s_.size() && std::string_view("()[],:;' \t\r\n").find(s_[pos_]) == std::string_view::npos) {
      out += s_[pos_++];
    }
    return out;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::vector<ParsedNode> nodes_;
};

}  // namespace

MergeTree from_newick(std::string_view text, const std::vector<std::string>& labels) {
  std::size_t root = 0;
  std::vector<ParsedNode> nodes = NewickParser(text).parse(root);
  // nodes are in post-order: children precede parents.
  std::vector<std::size_t> leaf_nodes;
  std::vector<std::size_t> internal;
  for (std::size_t i = 0; i < nodes.size(); ++i) (nodes[i].children.empty() ? leaf_nodes : internal).push_back(i);

  MergeTree tree;
  const std::size_t m = leaf_nodes.size();
  if (m < 2) throw FormatError("Newick tree needs at least 2 leaves");
  std::vector<std::size_t> id(nodes.size(), 0);
  if (labels.empty()) {
    for (std::size_t i = 0; i < m; ++i) {
      id[leaf_nodes[i]] = i;
      tree.labels.push_back(nodes[leaf_nodes[i]].label);
    }
  } else {
    if (labels.size() != m) throw FormatError("Newick tree has " + std::to_string(m) + " leaves, expected " +
                                              std::to_string(labels.size()));
    tree.labels = labels;
    std::vector<bool> taken(m, false);
    for (std::size_t n : leaf_nodes) {
      auto it = std::find(labels.begin(), labels.end(), nodes[n].label);
      if (it == labels.end()) throw FormatError("Newick leaf '" + nodes[n].label + "' not among the labels");
      const auto k = static_cast<std::size_t>(it - labels.begin());
      if (taken[k]) throw FormatError("Newick leaf '" + nodes[n].label + "' appears twice");
      taken[k] = true;
      id[n] = k;
    }
  }

  std::vector<double> height(nodes.size(), 0.0);
  std::vector<std::size_t> size(nodes.size(), 1);
  for (std::size_t n : internal) {
    const auto& c = nodes[n].children;
    height[n] = height[c[0]] + nodes[c[0]].length;
    size[n] = size[c[0]] + size[c[1]];
  }
  std::vector<std::size_t> order = internal;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return height[x] < height[y]; });
  for (std::size_t i = 0; i < order.size(); ++i) id[order[i]] = m + i;
  for (std::size_t n : order) {
    const auto& c = nodes[n].children;
    tree.merges.push_back({std::min(id[c[0]], id[c[1]]), std::max(id[c[0]], id[c[1]]), height[n], size[n]});
  }
  if (order.empty() || order.back() != root) throw FormatError("Newick root is not the highest node");
  tree.validate();
  return tree;
}

std::string merges_to_json(const MergeTree& tree) {
  nlohmann::json merges = nlohmann::json::array();
  for (const auto& g : tree.merges) {
    merges.push_back({{"a", g.a}, {"b", g.b}, {"height", g.height}, {"size", g.size}});
  }
  return nlohmann::json{{"labels", tree.labels}, {"merges", merges}}.dump(1);
}

std::string render_dendrogram_svg(const MergeTree& tree, const DendrogramOptions& opt) {
  tree.validate();
  const std::size_t m = tree.leaves();
  const std::vector<std::size_t> order = tree.leaf_order();
  const double top = opt.margin + (opt.title.empty() ? 0.0 : 20.0);
  const double plot_left = opt.margin + opt.label_width;
  const double plot_width = std::max(40.0, opt.width - plot_left - opt.margin);
  const double height_px = top + opt.leaf_spacing * static_cast<double>(m) + opt.margin;
  const double max_h = tree.merges.back().height;
  auto xpos = [&](double h) { return plot_left + (max_h > 0.0 ? h / max_h : 0.0) * plot_width; };

  std::vector<double> y(2 * m - 1, 0.0);
  std::vector<double> hgt(2 * m - 1, 0.0);
  for (std::size_t i = 0; i < order.size(); ++i) {
    y[order[i]] = top + opt.leaf_spacing * (static_cast<double>(i) + 0.5);
  }
  auto esc = [](std::string_view s) {
    std::string out;
    for (char c : s) {
      switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
      }
    }
    return out;
  };

  std::ostringstream os;
  char buf[256];
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                "font-family=\"sans-serif\" font-size=\"12\">\n",
                opt.width, height_px);
  os << buf;
  if (!opt.title.empty()) os << "<title>" << esc(opt.title) << "</title>\n";
  os << "<g stroke=\"#333\" stroke-width=\"1.5\">\n";
  for (std::size_t i = 0; i < tree.merges.size(); ++i) {
    const Merge& g = tree.merges[i];
    const std::size_t id = m + i;
    hgt[id] = g.height;
    y[id] = 0.5 * (y[g.a] + y[g.b]);
    const double xm = xpos(g.height);
    for (std::size_t c : {g.a, g.b}) {
      std::snprintf(buf, sizeof buf, "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\"/>\n", xpos(hgt[c]), y[c],
                    xm, y[c]);
      os << buf;
    }
    std::snprintf(buf, sizeof buf, "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\"/>\n", xm, y[g.a], xm,
                  y[g.b]);
    os << buf;
  }
  os << "</g>\n";
  for (std::size_t leaf : order) {
    std::snprintf(buf, sizeof buf, "<text x=\"%.2f\" y=\"%.2f\" text-anchor=\"end\" dominant-baseline=\"middle\">",
                  plot_left - 6.0, y[leaf]);
    os << buf << esc(tree.labels[leaf]) << "</text>\n";
  }
  std::snprintf(buf, sizeof buf, "<path d=\"M %.2f %.2f H %.2f\" stroke=\"#999\" fill=\"none\"/>\n", plot_left,
                height_px - opt.margin / 2, plot_left + plot_width);
  os << buf;
  os << "</svg>\n";
  return os.str();
}

}  // namespace awe::cluster

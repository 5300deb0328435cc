#include "stylo/explain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iterator>
#include <map>
#include <numeric>

namespace stylo {

namespace {

struct PathElement {
  int feature = -1;
  double zero_fraction = 0.0;
  double one_fraction = 0.0;
  double weight = 0.0;
};

void extend_path(std::vector<PathElement>& path, std::size_t depth, double zero_fraction, double one_fraction,
                 int feature) {
  path[depth] = {feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
  const double d = static_cast<double>(depth);
  for (std::size_t i = depth; i-- > 0;) {
    const double di = static_cast<double>(i);
    path[i + 1].weight += one_fraction * path[i].weight * (di + 1.0) / (d + 1.0);
    path[i].weight = zero_fraction * path[i].weight * (d - di) / (d + 1.0);
  }
}

void unwind_path(std::vector<PathElement>& path, std::size_t depth, std::size_t index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  const double d = static_cast<double>(depth);
  double next_one = path[depth].weight;
  for (std::size_t i = depth; i-- > 0;) {
    const double di = static_cast<double>(i);
    if (one != 0.0) {
      const double tmp = path[i].weight;
      path[i].weight = next_one * (d + 1.0) / ((di + 1.0) * one);
      next_one = tmp - path[i].weight * zero * (d - di) / (d + 1.0);
    } else {
      path[i].weight = path[i].weight * (d + 1.0) / (zero * (d - di));
    }
  }
  for (std::size_t i = index; i < depth; ++i) {
    path[i].feature = path[i + 1].feature;
    path[i].zero_fraction = path[i + 1].zero_fraction;
    path[i].one_fraction = path[i + 1].one_fraction;
  }
}

// Total permutation weight of the path with element `index` unwound.
double unwound_sum(const std::vector<PathElement>& path, std::size_t depth, std::size_t index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  const double d = static_cast<double>(depth);
  double next_one = path[depth].weight;
  double total = 0.0;
  for (std::size_t i = depth; i-- > 0;) {
    const double di = static_cast<double>(i);
    if (one != 0.0) {
      const double tmp = next_one * (d + 1.0) / ((di + 1.0) * one);
      total += tmp;
      next_one = path[i].weight - tmp * zero * (d - di) / (d + 1.0);
    } else if (zero != 0.0) {
      total += path[i].weight / zero / ((d - di) / (d + 1.0));
    }
  }
  return total;
}

double child_fraction(const Tree& tree, int node, int child) {
  const double cover = tree.nodes[node].cover;
  if (cover <= 0.0) return 0.5;
  return tree.nodes[child].cover / cover;
}

struct Walk {
  const Tree& tree;
  std::span<const double> x;
  double weight;
  std::vector<std::vector<double>>& phi;

  void add_leaf(const TreeNode& leaf, int feature, double scale) {
    if (leaf.value.size() == 1) {
      phi[tree.output][feature] += scale * leaf.value[0];
    } else {
      for (std::size_t k = 0; k < leaf.value.size(); ++k) phi[k][feature] += scale * leaf.value[k];
    }
  }

  void recurse(int node, std::vector<PathElement> path, std::size_t depth, double zero_fraction, double one_fraction,
               int feature) {
    path.resize(depth + 1);
    extend_path(path, depth, zero_fraction, one_fraction, feature);
    const TreeNode& n = tree.nodes[node];
    if (n.is_leaf()) {
      for (std::size_t i = 1; i <= depth; ++i) {
        const double w = unwound_sum(path, depth, i);
        add_leaf(n, path[i].feature, weight * w * (path[i].one_fraction - path[i].zero_fraction));
      }
      return;
    }
    const bool go_left = x[static_cast<std::size_t>(n.feature)] <= n.threshold;
    const int hot = go_left ? n.left : n.right;
    const int cold = go_left ? n.right : n.left;

    double incoming_zero = 1.0;
    double incoming_one = 1.0;
    for (std::size_t k = 1; k <= depth; ++k) {
      if (path[k].feature == n.feature) {
        incoming_zero = path[k].zero_fraction;
        incoming_one = path[k].one_fraction;
        unwind_path(path, depth, k);
        --depth;
        break;
      }
    }
    recurse(hot, path, depth + 1, child_fraction(tree, node, hot) * incoming_zero, incoming_one, n.feature);
    recurse(cold, path, depth + 1, child_fraction(tree, node, cold) * incoming_zero, 0.0, n.feature);
  }
};

void expected_value(const Tree& tree, int node, double scale, std::vector<double>& out) {
  const TreeNode& n = tree.nodes[node];
  if (n.is_leaf()) {
    if (n.value.size() == 1)
      out[tree.output] += scale * n.value[0];
    else
      for (std::size_t k = 0; k < n.value.size(); ++k) out[k] += scale * n.value[k];
    return;
  }
  expected_value(tree, n.left, scale * child_fraction(tree, node, n.left), out);
  expected_value(tree, n.right, scale * child_fraction(tree, node, n.right), out);
}

bool window_matches(const Sentence& s, std::size_t i, const FeatureKey& key) {
  const bool is_pos = key.category == Category::PosNgram;
  for (std::size_t j = 0; j < key.parts.size(); ++j) {
    const Token& t = s.tokens[i + j];
    if (t.is_named_entity || (is_pos && t.is_punct())) return false;
    const std::string part = is_pos ? t.upos : (t.is_space() ? std::string(kSpaceTag) : to_lower_ascii(t.lemma));
    if (part != key.parts[j]) return false;
  }
  return true;
}

std::string html_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

}  // namespace

std::vector<double> expected_margin(const TreeEnsemble& model) {
  std::vector<double> base = model.base_score;
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    expected_value(model.trees[t], 0, model.tree_weights[t], base);
  }
  return base;
}

ShapExplanation tree_shap(const TreeEnsemble& model, std::span<const double> x) {
  if (x.size() != model.num_features) {
    throw Error(ErrorCode::VocabularyMismatch, "row has " + std::to_string(x.size()) + " features, model expects " +
                                                   std::to_string(model.num_features));
  }
  ShapExplanation e;
  e.base = expected_margin(model);
  e.values.assign(model.num_outputs(), std::vector<double>(model.num_features, 0.0));
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    Walk walk{model.trees[t], x, model.tree_weights[t], e.values};
    walk.recurse(0, {}, 0, 1.0, 1.0, -1);
  }
  return e;
}

ShapExplanation tree_shap(const TreeEnsemble& model, const FeatureVocabulary& vocab, std::span<const double> x,
                          std::string doc_id) {
  check_vocabulary(model, vocab);
  auto e = tree_shap(model, x);
  e.doc_id = std::move(doc_id);
  return e;
}

double local_accuracy_error(const ShapExplanation& e, std::span<const double> margin) {
  double worst = 0.0;
  for (std::size_t k = 0; k < e.base.size(); ++k) {
    double total = e.base[k];
    for (double v : e.values[k]) total += v;
    worst = std::max(worst, std::abs(total - margin[k]));
  }
  return worst;
}

std::vector<std::string> output_names(const TreeEnsemble& model) {
  if (model.num_outputs() == 1 && model.classes.size() == 2) return {model.classes[1]};
  return model.classes;
}

GlobalRanking aggregate(std::span<const FoldExplanations> folds) {
  GlobalRanking ranking;
  if (folds.empty()) return ranking;
  ranking.outputs = folds.front().outputs;
  std::map<std::string, std::vector<double>> sums;
  std::size_t documents = 0;
  for (const auto& fold : folds) {
    if (fold.outputs != ranking.outputs) throw Error(ErrorCode::FoldMismatch, "folds explain different classes");
    for (const auto& name : fold.feature_names) sums.try_emplace(name, ranking.outputs.size(), 0.0);
    for (const auto& e : fold.explanations) {
      if (e.values.size() != ranking.outputs.size()) {
        throw Error(ErrorCode::FoldMismatch, "explanation '" + e.doc_id + "' has the wrong number of outputs");
      }
      for (std::size_t k = 0; k < e.values.size(); ++k) {
        if (e.values[k].size() != fold.feature_names.size()) {
          throw Error(ErrorCode::FoldMismatch, "explanation '" + e.doc_id + "' does not match its fold vocabulary");
        }
        for (std::size_t f = 0; f < e.values[k].size(); ++f) {
          sums[fold.feature_names[f]][k] += std::abs(e.values[k][f]);
        }
      }
      ++documents;
    }
  }
  for (auto& [name, s] : sums) {
    RankedFeature rf{name, s, 0.0};
    for (double& v : rf.mean_abs) {
      v = documents ? v / static_cast<double>(documents) : 0.0;
      rf.total += v;
    }
    rf.total /= static_cast<double>(std::max<std::size_t>(1, rf.mean_abs.size()));
    ranking.features.push_back(std::move(rf));
  }
  std::stable_sort(ranking.features.begin(), ranking.features.end(),
                   [](const RankedFeature& a, const RankedFeature& b) {
                     if (a.total != b.total) return a.total > b.total;
                     return a.feature < b.feature;
                   });
  return ranking;
}

std::string ranking_csv(const GlobalRanking& ranking) {
  std::string out = "feature,class,mean_abs_shap\n";
  for (const auto& f : ranking.features) {
    for (std::size_t k = 0; k < ranking.outputs.size(); ++k) {
      out += csv_field(f.feature) + ',' + csv_field(ranking.outputs[k]) + ',' + format_double(f.mean_abs[k]) + '\n';
    }
  }
  return out;
}

nlohmann::json explanation_json(const ShapExplanation& e, std::span<const std::string> feature_names) {
  nlohmann::json values = nlohmann::json::object();
  for (std::size_t f = 0; f < feature_names.size(); ++f) {
    std::vector<double> per_output;
    bool any = false;
    for (const auto& out : e.values) {
      per_output.push_back(out[f]);
      any = any || out[f] != 0.0;
    }
    if (any) values[feature_names[f]] = per_output;
  }
  return {{"doc_id", e.doc_id}, {"base", e.base}, {"values", std::move(values)}};
}

SpanReport highlight(const AnnotatedDocument& doc, std::span<const WeightedFeature> features) {
  const DocumentText dt = reconstruct_text(doc);
  SpanReport report;
  report.doc_id = doc.id;
  report.text = dt.text;
  for (const auto& wf : features) {
    const std::string name = wf.key.name();
    const std::size_t before = report.spans.size();
    for (std::size_t si = 0; si < doc.sentences.size(); ++si) {
      const Sentence& s = doc.sentences[si];
      const auto& offs = dt.spans[si];
      auto emit = [&](std::size_t a, std::size_t b) {
        report.spans.push_back({offs[a].first, offs[b].second, name, wf.value});
      };
      switch (wf.key.category) {
        case Category::LemmaNgram:
        case Category::PosNgram: {
          const std::size_t n = wf.key.parts.size();
          for (std::size_t i = 0; i + n <= s.tokens.size(); ++i) {
            if (window_matches(s, i, wf.key)) emit(i, i + n - 1);
          }
          break;
        }
        case Category::DepBigram:
          for (std::size_t i = 0; i < s.tokens.size(); ++i) {
            const Token& t = s.tokens[i];
            if (t.head == 0 || t.is_named_entity || t.is_punct()) continue;
            const auto h = static_cast<std::size_t>(t.head - 1);
            const Token& head = s.tokens[h];
            if (head.is_punct()) continue;
            if (t.upos == wf.key.parts[0] && t.deprel == wf.key.parts[1] && head.upos == wf.key.parts[2]) {
              emit(std::min(i, h), std::max(i, h));
            }
          }
          break;
        case Category::MorphUnigram:
          for (std::size_t i = 0; i < s.tokens.size(); ++i) {
            const Token& t = s.tokens[i];
            if (t.is_punct()) continue;
            if (std::find(t.morph.begin(), t.morph.end(), wf.key.parts[0]) != t.morph.end()) emit(i, i);
          }
          break;
      }
    }
    if (report.spans.size() == before) report.absent.push_back(wf);
  }
  std::stable_sort(report.spans.begin(), report.spans.end(), [](const HighlightSpan& a, const HighlightSpan& b) {
    if (a.start != b.start) return a.start < b.start;
    if (a.end != b.end) return a.end < b.end;
    return a.feature < b.feature;
  });
  return report;
}

nlohmann::json span_report_json(const SpanReport& r) {
  nlohmann::json spans = nlohmann::json::array();
  for (const auto& s : r.spans) {
    spans.push_back({{"start", s.start}, {"end", s.end}, {"feature", s.feature}, {"shap", s.value}});
  }
  nlohmann::json absent = nlohmann::json::array();
  for (const auto& a : r.absent) absent.push_back({{"feature", a.key.name()}, {"shap", a.value}});
  return {{"doc_id", r.doc_id}, {"text", r.text}, {"spans", std::move(spans)}, {"absent", std::move(absent)}};
}

std::string span_report_html(std::span<const SpanReport> reports) {
  std::string out =
      "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Feature highlights</title>\n"
      "<style>body{font-family:serif;max-width:50em;margin:auto}mark.pos{background:#f8c4c4}"
      "mark.neg{background:#c4d8f8}table{border-collapse:collapse}td{padding:0 1em}</style>\n"
      "</head><body>\n";
  for (const auto& r : reports) {
    out += "<h2>" + html_escape(r.doc_id) + "</h2>\n<p>";
    std::vector<std::string> chars;
    for (std::size_t pos = 0; pos < r.text.size();) {
      const std::size_t start = pos;
      utf8_next(r.text, pos);
      chars.emplace_back(r.text.substr(start, pos - start));
    }
    std::vector<std::vector<const HighlightSpan*>> cover(chars.size());
    for (const auto& s : r.spans) {
      for (std::size_t c = s.start; c < s.end && c < chars.size(); ++c) cover[c].push_back(&s);
    }
    std::size_t i = 0;
    while (i < chars.size()) {
      std::size_t j = i + 1;
      while (j < chars.size() && cover[j] == cover[i]) ++j;
      std::string text;
      for (std::size_t c = i; c < j; ++c) text += chars[c];
      if (cover[i].empty()) {
        out += html_escape(text);
      } else {
        double sum = 0.0;
        std::string title;
        for (const auto* s : cover[i]) {
          sum += s->value;
          if (!title.empty()) title += "; ";
          title += s->feature + " " + format_double(s->value);
        }
        out += "<mark class=\"" + std::string(sum >= 0 ? "pos" : "neg") + "\" title=\"" + html_escape(title) + "\">" +
               html_escape(text) + "</mark>";
      }
      i = j;
    }
    out += "</p>\n";
    if (!r.absent.empty()) {
      out += "<table><tr><th>absent feature</th><th>SHAP</th></tr>\n";
      for (const auto& a : r.absent) {
        out += "<tr><td>" + html_escape(a.key.name()) + "</td><td>" + format_double(a.value) + "</td></tr>\n";
      }
      out += "</table>\n";
    }
  }
  out += "</body></html>\n";
  return out;
}

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
constexpr double kLabelWidth = 280.0;
constexpr double kPlotWidth = 440.0;
constexpr double kRowHeight = 26.0;
constexpr double kTop = 40.0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

// Low values blue, high values red.
std::string gradient(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(30 + t * (255 - 30)));
  const int g = static_cast<int>(std::lround(136 + t * (0 - 136)));
  const int b = static_cast<int>(std::lround(229 + t * (82 - 229)));
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

std::string svg_open(double width, double height) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::string label(double x, double y, const std::string& text, const char* anchor = "end") {
  return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" + anchor + "\">" + html_escape(text) +
         "</text>\n";
}

}  // namespace

std::string shap_summary_svg(const PlotData& data, std::size_t output, std::size_t top_k, PlotColor color) {
  const std::size_t docs = data.explanations.size();
  if (data.rows.size() != docs || data.doc_classes.size() != docs) {
    throw Error(ErrorCode::ShapeMismatch, "plot needs one row and one class per explanation");
  }
  const std::size_t width = data.feature_names.size();
  for (const auto& e : data.explanations) {
    if (output >= e.values.size() || e.values[output].size() != width) {
      throw Error(ErrorCode::ShapeMismatch, "explanation '" + e.doc_id + "' does not match the plotted features");
    }
  }
  for (const auto& r : data.rows) {
    if (r.size() != width) throw Error(ErrorCode::ShapeMismatch, "feature row width differs from the names");
  }

  std::vector<double> mean_abs(width, 0.0);
  for (const auto& e : data.explanations) {
    for (std::size_t f = 0; f < width; ++f) mean_abs[f] += std::abs(e.values[output][f]);
  }
  std::vector<std::size_t> order(width);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (mean_abs[a] != mean_abs[b]) return mean_abs[a] > mean_abs[b];
    return data.feature_names[a] < data.feature_names[b];
  });
  order.resize(std::min(order.size(), top_k));

  double extent = 0.0;
  for (const auto& e : data.explanations) {
    for (auto f : order) extent = std::max(extent, std::abs(e.values[output][f]));
  }
  if (extent == 0.0) extent = 1.0;
  const double x0 = kLabelWidth + kPlotWidth / 2.0;
  auto x_of = [&](double v) { return x0 + v / extent * (kPlotWidth / 2.0 - 10.0); };

  std::vector<std::string> classes(data.doc_classes.begin(), data.doc_classes.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

  const double height = kTop + kRowHeight * static_cast<double>(order.size()) + 60.0;
  std::string out = svg_open(kLabelWidth + kPlotWidth + 140.0, height);
  out += "<line x1=\"" + num(x0) + "\" y1=\"" + num(kTop - 10) + "\" x2=\"" + num(x0) + "\" y2=\"" +
         num(height - 45) + "\" stroke=\"#999\"/>\n";
  for (std::size_t row = 0; row < order.size(); ++row) {
    const std::size_t f = order[row];
    const double y = kTop + kRowHeight * (static_cast<double>(row) + 0.5);
    out += label(kLabelWidth - 8, y + 4, data.feature_names[f]);
    double lo = data.rows.empty() ? 0.0 : data.rows[0][f];
    double hi = lo;
    for (const auto& r : data.rows) {
      lo = std::min(lo, r[f]);
      hi = std::max(hi, r[f]);
    }
    for (std::size_t d = 0; d < docs; ++d) {
      std::string fill;
      if (color == PlotColor::ByClass) {
        const auto c = std::lower_bound(classes.begin(), classes.end(), data.doc_classes[d]) - classes.begin();
        fill = kPalette[static_cast<std::size_t>(c) % std::size(kPalette)];
      } else {
        fill = gradient(hi > lo ? (data.rows[d][f] - lo) / (hi - lo) : 0.5);
      }
      // Stable vertical jitter so overlapping dots stay visible.
      const double jitter = static_cast<double>(fnv1a64(data.explanations[d].doc_id) % 1000) / 1000.0 - 0.5;
      out += "<circle cx=\"" + num(x_of(data.explanations[d].values[output][f])) + "\" cy=\"" +
             num(y + jitter * (kRowHeight - 10)) + "\" r=\"3\" fill=\"" + fill + "\" fill-opacity=\"0.8\"/>\n";
    }
  }
  const double axis_y = height - 30;
  out += label(x0, axis_y, "SHAP value", "middle");
  out += label(x_of(-extent), axis_y, num(-extent), "middle");
  out += label(x_of(extent), axis_y, num(extent), "middle");
  const double legend_x = kLabelWidth + kPlotWidth + 20;
  if (color == PlotColor::ByClass) {
    for (std::size_t c = 0; c < classes.size(); ++c) {
      const double y = kTop + 18.0 * static_cast<double>(c);
      out += "<circle cx=\"" + num(legend_x) + "\" cy=\"" + num(y - 4) + "\" r=\"4\" fill=\"" +
             kPalette[c % std::size(kPalette)] + "\"/>\n";
      out += label(legend_x + 10, y, classes[c], "start");
    }
  } else {
    out += label(legend_x, kTop, "feature value", "start");
    out += "<rect x=\"" + num(legend_x) + "\" y=\"" + num(kTop + 8) + "\" width=\"12\" height=\"12\" fill=\"" +
           gradient(1.0) + "\"/>\n" + label(legend_x + 18, kTop + 18, "high", "start");
    out += "<rect x=\"" + num(legend_x) + "\" y=\"" + num(kTop + 26) + "\" width=\"12\" height=\"12\" fill=\"" +
           gradient(0.0) + "\"/>\n" + label(legend_x + 18, kTop + 36, "low", "start");
  }
  out += "</svg>\n";
  return out;
}

std::string ranking_svg(const GlobalRanking& ranking, std::size_t top_k) {
  const auto top = ranking.top(top_k);
  double longest = 0.0;
  for (const auto& f : top.features) {
    double sum = 0.0;
    for (double v : f.mean_abs) sum += v;
    longest = std::max(longest, sum);
  }
  if (longest == 0.0) longest = 1.0;
  const double height = kTop + kRowHeight * static_cast<double>(top.features.size()) + 40.0;
  std::string out = svg_open(kLabelWidth + kPlotWidth + 160.0, height);
  for (std::size_t row = 0; row < top.features.size(); ++row) {
    const auto& f = top.features[row];
    const double y = kTop + kRowHeight * static_cast<double>(row);
    out += label(kLabelWidth - 8, y + kRowHeight / 2 + 4, f.feature);
    double x = kLabelWidth;
    for (std::size_t k = 0; k < f.mean_abs.size(); ++k) {
      const double w = f.mean_abs[k] / longest * kPlotWidth;
      out += "<rect x=\"" + num(x) + "\" y=\"" + num(y + 4) + "\" width=\"" + num(w) + "\" height=\"" +
             num(kRowHeight - 8) + "\" fill=\"" + kPalette[k % std::size(kPalette)] + "\"/>\n";
      x += w;
    }
  }
  out += label(kLabelWidth + kPlotWidth / 2, height - 12, "mean |SHAP value|", "middle");
  const double legend_x = kLabelWidth + kPlotWidth + 20;
  for (std::size_t k = 0; k < top.outputs.size(); ++k) {
    const double y = kTop + 18.0 * static_cast<double>(k);
    out += "<rect x=\"" + num(legend_x) + "\" y=\"" + num(y - 10) + "\" width=\"12\" height=\"12\" fill=\"" +
           kPalette[k % std::size(kPalette)] + "\"/>\n";
    out += label(legend_x + 18, y, top.outputs[k], "start");
  }
  out += "</svg>\n";
  return out;
}

}  // namespace stylo

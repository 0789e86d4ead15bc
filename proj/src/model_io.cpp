#include "crimegat/model_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include "crimegat/errors.hpp"

namespace crimegat {

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_params(std::ostream& out, AnyModel& model) {
  std::vector<double> flat;
  for_each_param(model, [&](std::span<double> values, std::span<double>) {
    flat.insert(flat.end(), values.begin(), values.end());
  });
  out << "params " << flat.size() << "\n";
  for (double v : flat) out << fmt17(v) << "\n";
}

std::string next_line(std::istream& in) {
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) return line;
  }
  throw DataError("model file: unexpected end of file");
}

std::vector<std::string> tokens_of(const std::string& line) {
  std::istringstream iss(line);
  std::vector<std::string> toks;
  std::string t;
  while (iss >> t) toks.push_back(t);
  return toks;
}

double parse_float(const std::string& tok) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size()) {
    throw DataError("model file: bad float '" + tok + "'");
  }
  return v;
}

std::size_t parse_count(const std::string& tok) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(tok.c_str(), &end, 10);
  if (end != tok.c_str() + tok.size()) {
    throw DataError("model file: bad integer '" + tok + "'");
  }
  return static_cast<std::size_t>(v);
}

std::vector<double> read_params(std::istream& in) {
  const auto header = tokens_of(next_line(in));
  if (header.size() != 2 || header[0] != "params") {
    throw DataError("model file: expected a 'params <count>' line");
  }
  const std::size_t count = parse_count(header[1]);
  std::vector<double> flat;
  flat.reserve(count);
  for (std::size_t i = 0; i < count; ++i) flat.push_back(parse_float(next_line(in)));
  return flat;
}

void load_flat_into(AnyModel& model, const std::vector<double>& flat) {
  std::size_t offset = 0;
  for_each_param(model, [&](std::span<double> values, std::span<double>) {
    if (offset + values.size() > flat.size()) {
      throw DataError("model file: parameter block is too short");
    }
    for (double& v : values) v = flat[offset++];
  });
  if (offset != flat.size()) {
    throw DataError("model file: parameter count does not match the architecture");
  }
}

}  // namespace

void save_model(std::ostream& out, const AnyModel& model) {
  out << "crimegat-model " << kModelSchemaVersion << "\n";
  out << "method " << to_string(model_method(model)) << "\n";

  const auto write_scorer = [&](const LinkScorer& s) {
    out << "scorer " << to_string(s.kind) << " " << s.w.size() << "\n";
  };

  if (const auto* gat = std::get_if<GatModel>(&model)) {
    out << "leaky_slope " << fmt17(gat->leaky_slope) << "\n";
    write_scorer(gat->scorer);
    out << "layers " << gat->layers.size() << "\n";
    for (const GatLayer& layer : gat->layers) {
      out << "layer gat " << layer.in_dim() << " " << layer.head_dim() << " "
          << layer.heads.size() << " " << to_string(layer.combine) << " "
          << to_string(layer.activation) << "\n";
    }
  } else if (const auto* gcn = std::get_if<GcnModel>(&model)) {
    out << "leaky_slope " << fmt17(gcn->leaky_slope) << "\n";
    write_scorer(gcn->scorer);
    out << "layers " << gcn->layers.size() << "\n";
    for (const GcnLayerParams& layer : gcn->layers) {
      out << "layer gcn " << layer.W.cols() << " " << layer.W.rows() << " "
          << to_string(layer.activation) << "\n";
    }
  } else {
    const auto& sage = std::get<SageModel>(model);
    out << "leaky_slope " << fmt17(sage.leaky_slope) << "\n";
    write_scorer(sage.scorer);
    out << "layers " << sage.layers.size() << "\n";
    for (const SageLayerParams& layer : sage.layers) {
      out << "layer sage " << layer.W_self.cols() << " " << layer.W_self.rows() << " "
          << to_string(layer.activation) << "\n";
    }
  }
  AnyModel copy = model;
  write_params(out, copy);
}

void save_model(std::ostream& out, const SvmLinkModel& model) {
  out << "crimegat-model " << kModelSchemaVersion << "\n";
  out << "method svm\n";
  out << "dim " << model.w.size() << "\n";
  const std::size_t count = model.w.size() * 3 + 1;
  out << "params " << count << "\n";
  for (double v : model.w) out << fmt17(v) << "\n";
  out << fmt17(model.b) << "\n";
  for (double v : model.standardizer.mean) out << fmt17(v) << "\n";
  for (double v : model.standardizer.inv_sd) out << fmt17(v) << "\n";
}

ModelFile load_model(std::istream& in) {
  const auto magic = tokens_of(next_line(in));
  if (magic.size() != 2 || magic[0] != "crimegat-model") {
    throw DataError("model file: missing 'crimegat-model <version>' header");
  }
  if (parse_count(magic[1]) != static_cast<std::size_t>(kModelSchemaVersion)) {
    throw DataError("model file: schema version " + magic[1] + " is not supported (expected " +
                    std::to_string(kModelSchemaVersion) + ")");
  }
  const auto method_line = tokens_of(next_line(in));
  if (method_line.size() != 2 || method_line[0] != "method") {
    throw DataError("model file: expected a 'method <name>' line");
  }

  ModelFile file;
  file.method = parse_method(method_line[1]);

  if (file.method == Method::svm) {
    const auto dim_line = tokens_of(next_line(in));
    if (dim_line.size() != 2 || dim_line[0] != "dim") {
      throw DataError("model file: expected a 'dim <d>' line");
    }
    const std::size_t dim = parse_count(dim_line[1]);
    const std::vector<double> flat = read_params(in);
    if (flat.size() != dim * 3 + 1) {
      throw DataError("model file: svm parameter count does not match dim");
    }
    SvmLinkModel svm;
    svm.w.assign(flat.begin(), flat.begin() + dim);
    svm.b = flat[dim];
    svm.standardizer.mean.assign(flat.begin() + dim + 1, flat.begin() + 2 * dim + 1);
    svm.standardizer.inv_sd.assign(flat.begin() + 2 * dim + 1, flat.end());
    file.svm = std::move(svm);
    return file;
  }
  if (file.method == Method::pa) {
    throw DataError("model file: method 'pa' has no parameters to persist");
  }

  const auto slope_line = tokens_of(next_line(in));
  if (slope_line.size() != 2 || slope_line[0] != "leaky_slope") {
    throw DataError("model file: expected a 'leaky_slope <value>' line");
  }
  const double slope = parse_float(slope_line[1]);

  const auto scorer_line = tokens_of(next_line(in));
  if (scorer_line.size() != 3 || scorer_line[0] != "scorer") {
    throw DataError("model file: expected a 'scorer <kind> <dim>' line");
  }
  const ScorerKind scorer_kind = parse_scorer_kind(scorer_line[1]);
  const std::size_t scorer_dim = parse_count(scorer_line[2]);

  const auto layers_line = tokens_of(next_line(in));
  if (layers_line.size() != 2 || layers_line[0] != "layers") {
    throw DataError("model file: expected a 'layers <count>' line");
  }
  const std::size_t num_layers = parse_count(layers_line[1]);
  if (num_layers == 0) throw DataError("model file: zero layers");

  struct LayerDesc {
    std::string kind;
    std::size_t in = 0, dim = 0, heads = 1;
    HeadCombine combine = HeadCombine::concat;
    Activation activation = Activation::leaky_relu;
  };
  std::vector<LayerDesc> descs;
  for (std::size_t i = 0; i < num_layers; ++i) {
    const auto toks = tokens_of(next_line(in));
    if (toks.size() < 3 || toks[0] != "layer") {
      throw DataError("model file: expected a layer description line");
    }
    LayerDesc d;
    d.kind = toks[1];
    if (d.kind == "gat") {
      if (toks.size() != 7) throw DataError("model file: bad gat layer line");
      d.in = parse_count(toks[2]);
      d.dim = parse_count(toks[3]);
      d.heads = parse_count(toks[4]);
      d.combine = parse_head_combine(toks[5]);
      d.activation = parse_activation(toks[6]);
    } else if (d.kind == "gcn" || d.kind == "sage") {
      if (toks.size() != 5) throw DataError("model file: bad " + d.kind + " layer line");
      d.in = parse_count(toks[2]);
      d.dim = parse_count(toks[3]);
      d.activation = parse_activation(toks[4]);
    } else {
      throw DataError("model file: unknown layer kind '" + d.kind + "'");
    }
    descs.push_back(d);
  }

  LinkScorer scorer;
  scorer.kind = scorer_kind;
  if (scorer_kind == ScorerKind::hadamard_linear) {
    scorer.w.assign(scorer_dim, 0.0);
    scorer.grad_w.assign(scorer_dim, 0.0);
  }

  AnyModel model;
  if (file.method == Method::crimegat) {
    GatModel m;
    m.leaky_slope = slope;
    for (const LayerDesc& d : descs) {
      if (d.kind != "gat") throw DataError("model file: crimegat expects gat layers");
      GatLayer layer;
      layer.activation = d.activation;
      layer.combine = d.combine;
      for (std::size_t h = 0; h < d.heads; ++h) {
        GatLayerParams head;
        head.W = Matrix(d.dim, d.in);
        head.grad_W = Matrix(d.dim, d.in);
        head.a.assign(2 * d.dim, 0.0);
        head.grad_a.assign(2 * d.dim, 0.0);
        layer.heads.push_back(std::move(head));
      }
      m.layers.push_back(std::move(layer));
    }
    m.scorer = scorer;
    model = std::move(m);
  } else if (file.method == Method::gcn) {
    GcnModel m;
    m.leaky_slope = slope;
    for (const LayerDesc& d : descs) {
      if (d.kind != "gcn") throw DataError("model file: gcn expects gcn layers");
      GcnLayerParams layer;
      layer.activation = d.activation;
      layer.W = Matrix(d.dim, d.in);
      layer.grad_W = Matrix(d.dim, d.in);
      m.layers.push_back(std::move(layer));
    }
    m.scorer = scorer;
    model = std::move(m);
  } else {
    SageModel m;
    m.leaky_slope = slope;
    for (const LayerDesc& d : descs) {
      if (d.kind != "sage") throw DataError("model file: sage expects sage layers");
      SageLayerParams layer;
      layer.activation = d.activation;
      layer.W_self = Matrix(d.dim, d.in);
      layer.W_neigh = Matrix(d.dim, d.in);
      layer.grad_W_self = Matrix(d.dim, d.in);
      layer.grad_W_neigh = Matrix(d.dim, d.in);
      m.layers.push_back(std::move(layer));
    }
    m.scorer = scorer;
    model = std::move(m);
  }

  load_flat_into(model, read_params(in));
  file.net = std::move(model);
  return file;
}

void save_model_file(const std::string& path, const AnyModel& model) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model file '" + path + "'");
  save_model(out, model);
}

void save_model_file(const std::string& path, const SvmLinkModel& model) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model file '" + path + "'");
  save_model(out, model);
}

ModelFile load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file '" + path + "'");
  return load_model(in);
}

}  // namespace crimegat

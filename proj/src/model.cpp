#include "dialgraph/model.hpp"

#include "json.hpp"

namespace dialgraph {

using nlohmann::json;

void ModelConfig::validate() const {
  if (d < 2) throw ConfigError("model: d must be at least 2");
  if (heads < 1 || d % heads != 0)
    throw ConfigError("model: heads " + std::to_string(heads) + " must divide d " +
                      std::to_string(d));
  if (arc_types < 1) throw ConfigError("model: arc_types must be at least 1");
  if (rgcn_layers < 1) throw ConfigError("model: rgcn_layers must be at least 1");
  if (projections < 1) throw ConfigError("model: projections must be at least 1");
  if (encoder_layers < 0) throw ConfigError("model: encoder_layers must be nonnegative");
  if (comparator_depth < 1) throw ConfigError("model: comparator_depth must be at least 1");
  if (max_turns < 1 || max_sentence_tokens < 1 || max_seq_len < 8)
    throw ConfigError("model: sequence limits must be positive");
}

std::string ModelConfig::to_json() const {
  json j;
  j["d"] = d;
  j["encoder_layers"] = encoder_layers;
  j["heads"] = heads;
  j["projections"] = projections;
  j["arc_types"] = arc_types;
  j["rgcn_layers"] = rgcn_layers;
  j["comparator_depth"] = comparator_depth;
  j["d_hidden"] = d_hidden;
  j["mode"] = (mode == ArcMode::Soft) ? "soft" : "hard";
  j["odc_before"] = odc_before;
  j["odc_after"] = odc_after;
  j["urr"] = urr;
  j["max_turns"] = max_turns;
  j["max_sentence_tokens"] = max_sentence_tokens;
  j["max_seq_len"] = max_seq_len;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("model config: malformed JSON");
  ModelConfig c;
  c.d = j.value("d", c.d);
  c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
  c.heads = j.value("heads", c.heads);
  c.projections = j.value("projections", c.projections);
  c.arc_types = j.value("arc_types", c.arc_types);
  c.rgcn_layers = j.value("rgcn_layers", c.rgcn_layers);
  c.comparator_depth = j.value("comparator_depth", c.comparator_depth);
  c.d_hidden = j.value("d_hidden", c.d_hidden);
  std::string mode = j.value("mode", std::string("soft"));
  if (mode != "soft" && mode != "hard")
    throw ConfigError("model config: mode must be soft or hard, got '" + mode + "'");
  c.mode = (mode == "soft") ? ArcMode::Soft : ArcMode::Hard;
  c.odc_before = j.value("odc_before", c.odc_before);
  c.odc_after = j.value("odc_after", c.odc_after);
  c.urr = j.value("urr", c.urr);
  c.max_turns = j.value("max_turns", c.max_turns);
  c.max_sentence_tokens = j.value("max_sentence_tokens", c.max_sentence_tokens);
  c.max_seq_len = j.value("max_seq_len", c.max_seq_len);
  c.validate();
  return c;
}

ModelParams create_model_params(ParameterStore& store, const ModelConfig& cfg, long vocab_size) {
  cfg.validate();
  ModelParams p;
  p.encoder = create_encoder_params(store, cfg.encoder_config(), vocab_size);
  p.odc = create_odc_params(store, cfg.odc_config(), cfg.odc_before, cfg.odc_after);
  if (cfg.urr) p.urr = create_urr_params(store, cfg.urr_config());
  p.head = create_prediction_params(store, cfg.d, cfg.head_hidden());
  return p;
}

ModelParams model_params(const ParameterStore& store, const ModelConfig& cfg) {
  ModelParams p;
  p.encoder = encoder_params(store, cfg.encoder_config());
  if (cfg.odc_before) p.odc.before = comparator_params(store, Comparator::Before, cfg.odc_config());
  if (cfg.odc_after) p.odc.after = comparator_params(store, Comparator::After, cfg.odc_config());
  if (cfg.urr) p.urr = urr_params(store, cfg.urr_config());
  p.head = prediction_params(store);
  return p;
}

ForwardResult forward(const DialogueExample& example, const ModelParams& params,
                      const ModelConfig& cfg) {
  ForwardResult res;
  EncodedDialogue enc = encode(example, params.encoder, cfg.encoder_config());

  Tensor options = enc.option_summaries;
  if (cfg.odc_before) {
    ComparatorOutput c = compare_options(options, params.odc.before);
    options = c.out;
    res.diag.attn_before = std::move(c.weights);
  }

  res.diag.n_utterances = enc.n_utterances;
  if (cfg.urr) {
    // The graph is built over the summary vectors (each sentence's [CLS]
    // acts as a node); the pre-reasoning comparison joins the reasoned
    // option vectors residually.
    UrrOutput u = urr_forward(enc.utterance_summaries, enc.option_summaries, params.urr,
                              cfg.urr_config());
    options = cfg.odc_before ? add(u.options, options) : u.options;
    res.diag.arcs = u.graph.arcs;
    res.diag.arc_results.reserve(u.graph.arcs.size());
    for (std::size_t a = 0; a < u.graph.arcs.size(); ++a)
      res.diag.arc_results.push_back(u.graph.arc_result(a));
  }

  if (cfg.odc_after) {
    ComparatorOutput c = compare_options(options, params.odc.after);
    options = c.out;
    res.diag.attn_after = std::move(c.weights);
  }

  res.scores = score_options(options, params.head);
  res.loss = ce_loss(res.scores, example.answer);
  return res;
}

}  // namespace dialgraph

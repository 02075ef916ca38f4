#include "dialgraph/train.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include "json.hpp"

namespace dialgraph {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- RunConfig -------------------------------------------------------------

std::string RunConfig::to_json() const {
  json j;
  j["model"] = json::parse(model.to_json());
  json t;
  t["epochs"] = train.epochs;
  t["batch_size"] = train.batch_size;
  t["learning_rate"] = train.learning_rate;
  t["weight_decay"] = train.weight_decay;
  t["beta1"] = train.beta1;
  t["beta2"] = train.beta2;
  t["adam_eps"] = train.adam_eps;
  t["seed"] = train.seed;
  t["sum_loss"] = train.sum_loss;
  t["eval_workers"] = train.eval_workers;
  j["train"] = t;
  j["data"] = {{"train_path", train_path}, {"val_path", val_path}};
  j["out_dir"] = out_dir;
  return j.dump();
}

RunConfig RunConfig::from_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("run config: malformed JSON");
  RunConfig c;
  if (j.contains("model")) c.model = ModelConfig::from_json(j["model"].dump());
  if (j.contains("train")) {
    const json& t = j["train"];
    c.train.epochs = t.value("epochs", c.train.epochs);
    c.train.batch_size = t.value("batch_size", c.train.batch_size);
    c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
    c.train.weight_decay = t.value("weight_decay", c.train.weight_decay);
    c.train.beta1 = t.value("beta1", c.train.beta1);
    c.train.beta2 = t.value("beta2", c.train.beta2);
    c.train.adam_eps = t.value("adam_eps", c.train.adam_eps);
    c.train.seed = t.value("seed", c.train.seed);
    c.train.sum_loss = t.value("sum_loss", c.train.sum_loss);
    c.train.eval_workers = t.value("eval_workers", c.train.eval_workers);
  }
  if (j.contains("data")) {
    c.train_path = j["data"].value("train_path", std::string());
    c.val_path = j["data"].value("val_path", std::string());
  }
  c.out_dir = j.value("out_dir", c.out_dir);
  return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("run config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return from_json(text);
}

// ---- evaluation ---------------------------------------------------------------

RankMetrics evaluate(const std::vector<DialogueExample>& examples, const ModelParams& params,
                     const ModelConfig& cfg, int workers) {
  if (examples.empty()) throw ContractError("evaluate: empty dataset");
  ModelConfig eval_cfg = cfg;
  eval_cfg.mode = ArcMode::Hard;

  std::vector<ScoredExample> scored(examples.size());
  auto run_range = [&](std::size_t begin, std::size_t stride) {
    NoGradGuard ng;
    for (std::size_t i = begin; i < examples.size(); i += stride) {
      ForwardResult r = forward(examples[i], params, eval_cfg);
      const Mat& s = r.scores.value();
      scored[i] = make_scored({s(0, 0), s(1, 0), s(2, 0), s(3, 0)}, examples[i].answer);
    }
  };

  if (workers <= 1) {
    run_range(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back(run_range, static_cast<std::size_t>(w), static_cast<std::size_t>(workers));
    for (auto& t : pool) t.join();
  }
  return rank_metrics(scored);
}

// ---- checkpoints -----------------------------------------------------------------

void save_checkpoint(const std::string& path, const ParameterStore& store,
                     const ModelConfig& cfg, const Vocabulary& vocab) {
  json extra;
  extra["model"] = json::parse(cfg.to_json());
  extra["vocab"] = json::parse(vocab.to_json());
  extra["seed"] = store.seed();
  store.save(path, extra.dump());
}

LoadedModel load_checkpoint(const std::string& path) {
  json extra = json::parse(ParameterStore::peek_extra(path), nullptr, false);
  if (extra.is_discarded() || !extra.contains("model") || !extra.contains("vocab"))
    throw CheckpointError("checkpoint is missing its embedded config: " + path);

  LoadedModel m;
  m.config = ModelConfig::from_json(extra["model"].dump());
  m.vocab = Vocabulary::from_json(extra["vocab"].dump());
  m.store = std::make_shared<ParameterStore>(extra.value("seed", 0ULL));
  m.params = create_model_params(*m.store, m.config, m.vocab.size());
  m.store->load(path);
  return m;
}

// ---- training -----------------------------------------------------------------------

namespace {

struct ShuffleRng {
  std::uint64_t state;
  explicit ShuffleRng(std::uint64_t seed) : state(seed + 0x9e3779b97f4a7c15ULL) {}
  std::uint64_t next() {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
};

void shuffle_indices(std::vector<std::size_t>& idx, ShuffleRng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[rng.next() % i]);
}

std::vector<DialogueExample> tokenize_corpus(const std::vector<RawDialogue>& raw,
                                             const Vocabulary& vocab, const ModelConfig& cfg) {
  TokenizeLimits limits{cfg.max_turns, cfg.max_sentence_tokens};
  std::vector<DialogueExample> out;
  out.reserve(raw.size());
  for (const auto& r : raw) out.push_back(tokenize_dialogue(r, vocab, limits));
  return out;
}

}  // namespace

TrainResult cmd_train(const RunConfig& cfg) {
  cfg.model.validate();
  if (!fs::exists(cfg.train_path))
    throw ConfigError("train: training data not found: " + cfg.train_path);
  if (!fs::exists(cfg.val_path))
    throw ConfigError("train: validation data not found: " + cfg.val_path);
  fs::create_directories(cfg.out_dir);

  auto raw_train = load_corpus(cfg.train_path);
  auto raw_val = load_corpus(cfg.val_path);
  Vocabulary vocab = build_vocab(raw_train);
  auto train_set = tokenize_corpus(raw_train, vocab, cfg.model);
  auto val_set = tokenize_corpus(raw_val, vocab, cfg.model);

  ParameterStore store(cfg.train.seed);
  ModelParams params = create_model_params(store, cfg.model, vocab.size());

  long batches_per_epoch =
      static_cast<long>((train_set.size() + cfg.train.batch_size - 1) / cfg.train.batch_size);
  CosineSchedule schedule{cfg.train.learning_rate, cfg.train.epochs * batches_per_epoch};
  AdamW optimizer(schedule,
                  {cfg.train.weight_decay, cfg.train.beta1, cfg.train.beta2, cfg.train.adam_eps});

  {
    std::ofstream cf(cfg.out_dir + "/config.json");
    cf << cfg.to_json() << "\n";
  }
  std::string metrics_path = cfg.out_dir + "/metrics.jsonl";
  std::ofstream log(metrics_path);
  if (!log) throw ConfigError("train: cannot write " + metrics_path);

  TrainResult result;
  result.metrics_path = metrics_path;
  result.best_checkpoint = cfg.out_dir + "/best.ckpt";

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
    ShuffleRng rng(cfg.train.seed * 7919 + static_cast<std::uint64_t>(epoch));
    shuffle_indices(order, rng);

    double epoch_loss = 0.0;
    bool finite = true;
    for (std::size_t b = 0; b < order.size() && finite; b += cfg.train.batch_size) {
      std::size_t end = std::min(order.size(), b + cfg.train.batch_size);
      store.zero_grads();
      for (std::size_t i = b; i < end && finite; ++i) {
        ForwardResult r = forward(train_set[order[i]], params, cfg.model);
        double value = r.loss.item();
        if (!std::isfinite(value)) {
          finite = false;
          break;
        }
        epoch_loss += value;
        double weight = cfg.train.sum_loss ? 1.0 : 1.0 / static_cast<double>(end - b);
        backward(scale(r.loss, weight));
      }
      if (finite) optimizer.step(store);
    }
    if (!finite) {
      json j;
      j["epoch"] = epoch;
      j["error"] = "non-finite loss; aborting with best checkpoint retained";
      log << j.dump() << "\n";
      result.aborted = true;
      break;
    }
    epoch_loss /= static_cast<double>(train_set.size());

    RankMetrics val = evaluate(val_set, params, cfg.model, cfg.train.eval_workers);
    json j;
    j["epoch"] = epoch;
    j["train_loss"] = epoch_loss;
    j["r4_at_1"] = val.r4_at_1;
    j["r4_at_2"] = val.r4_at_2;
    j["mrr"] = val.mrr;
    j["lr"] = optimizer.last_lr();
    std::string line = j.dump();
    log << line << "\n";
    log.flush();
    result.log_lines.push_back(line);

    if (result.best_epoch < 0 || val.r4_at_1 > result.best_val.r4_at_1) {
      result.best_val = val;
      result.best_epoch = epoch;
      save_checkpoint(result.best_checkpoint, store, cfg.model, vocab);
    }
  }
  save_checkpoint(cfg.out_dir + "/last.ckpt", store, cfg.model, vocab);
  return result;
}

RankMetrics cmd_eval(const std::string& checkpoint, const std::string& data_path, int workers) {
  LoadedModel m = load_checkpoint(checkpoint);
  auto raw = load_corpus(data_path);
  auto examples = tokenize_corpus(raw, m.vocab, m.config);
  return evaluate(examples, m.params, m.config, workers);
}

// ---- dump -------------------------------------------------------------------------

namespace {

std::string node_label(int idx, int n_utterances) {
  if (idx < n_utterances) return "u" + std::to_string(idx + 1);
  return std::string("o") + static_cast<char>('A' + (idx - n_utterances));
}

void write_attention_csv(const std::string& path, const Mat& w) {
  std::ofstream os(path);
  os << ",A,B,C,D\n";
  for (int i = 0; i < 4; ++i) {
    os << static_cast<char>('A' + i);
    for (int j = 0; j < 4; ++j) os << "," << std::to_string(w(i, j));
    os << "\n";
  }
}

}  // namespace

std::vector<std::string> cmd_dump(const std::string& checkpoint, const std::string& data_path,
                                  const std::string& example_id, const std::string& out_dir) {
  LoadedModel m = load_checkpoint(checkpoint);
  auto raw = load_corpus(data_path);
  const RawDialogue* hit = nullptr;
  for (const auto& r : raw)
    if (r.id == example_id) hit = &r;
  if (!hit) throw ContractError("dump: no example with id '" + example_id + "' in " + data_path);

  TokenizeLimits limits{m.config.max_turns, m.config.max_sentence_tokens};
  DialogueExample ex = tokenize_dialogue(*hit, m.vocab, limits);

  NoGradGuard ng;
  ModelConfig cfg = m.config;
  cfg.mode = ArcMode::Hard;
  ForwardResult r = forward(ex, m.params, cfg);

  fs::create_directories(out_dir);
  std::vector<std::string> written;
  if (r.diag.attn_before) {
    std::string p = out_dir + "/odc_before.csv";
    write_attention_csv(p, *r.diag.attn_before);
    written.push_back(p);
  }
  if (r.diag.attn_after) {
    std::string p = out_dir + "/odc_after.csv";
    write_attention_csv(p, *r.diag.attn_after);
    written.push_back(p);
  }
  if (!r.diag.arcs.empty()) {
    std::string p = out_dir + "/arcs.csv";
    std::ofstream os(p);
    os << "src,dst,hard_type";
    for (int t = 0; t < m.config.arc_types; ++t) os << ",p" << t;
    os << "\n";
    for (std::size_t a = 0; a < r.diag.arcs.size(); ++a) {
      const auto& arc = r.diag.arcs[a];
      const auto& res = r.diag.arc_results[a];
      os << node_label(arc.src, r.diag.n_utterances) << ","
         << node_label(arc.dst, r.diag.n_utterances) << "," << res.hard_type;
      for (double pr : res.probs) os << "," << std::to_string(pr);
      os << "\n";
    }
    written.push_back(p);
  }
  return written;
}

// ---- sweep -------------------------------------------------------------------------

std::string SweepResult::to_csv() const {
  std::string out = axis + ",r4_at_1,r4_at_2,mrr\n";
  for (const auto& row : rows) {
    out += std::to_string(row.value) + ",";
    if (row.failed) {
      out += "failed,failed,failed\n";
    } else {
      out += std::to_string(row.metrics.r4_at_1) + "," + std::to_string(row.metrics.r4_at_2) +
             "," + std::to_string(row.metrics.mrr) + "\n";
    }
  }
  return out;
}

std::string SweepResult::to_markdown() const {
  const SweepRow* base = nullptr;
  for (const auto& row : rows)
    if (row.value == baseline_value && !row.failed) base = &row;

  auto delta = [](double v, double b) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%+.3f", v - b);
    return std::string(buf);
  };
  auto plain = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return std::string(buf);
  };

  std::string out = "| " + axis + " | R_4@1 | R_4@2 | MRR |\n|---|---|---|---|\n";
  for (const auto& row : rows) {
    out += "| " + std::to_string(row.value) + " | ";
    if (row.failed) {
      out += "failed | failed | failed |\n";
    } else if (base && row.value != baseline_value) {
      out += delta(row.metrics.r4_at_1, base->metrics.r4_at_1) + " | " +
             delta(row.metrics.r4_at_2, base->metrics.r4_at_2) + " | " +
             delta(row.metrics.mrr, base->metrics.mrr) + " |\n";
    } else {
      out += plain(row.metrics.r4_at_1) + " | " + plain(row.metrics.r4_at_2) + " | " +
             plain(row.metrics.mrr) + " |\n";
    }
  }
  return out;
}

SweepResult cmd_sweep(const RunConfig& base, const std::string& axis,
                      const std::vector<int>& values) {
  if (values.empty()) throw ContractError("sweep: empty axis value list");
  if (axis != "T" && axis != "l") throw ConfigError("sweep: axis must be T or l");

  SweepResult result;
  result.axis = axis;
  result.baseline_value = (axis == "T") ? base.model.arc_types : base.model.rgcn_layers;
  bool baseline_present = false;
  for (int v : values) baseline_present = baseline_present || v == result.baseline_value;
  if (!baseline_present) result.baseline_value = values.front();

  for (int v : values) {
    RunConfig cfg = base;
    if (axis == "T")
      cfg.model.arc_types = v;
    else
      cfg.model.rgcn_layers = v;
    cfg.out_dir = base.out_dir + "/" + axis + std::to_string(v);

    SweepRow row;
    row.value = v;
    try {
      TrainResult t = cmd_train(cfg);
      if (t.best_epoch < 0) throw Error("no epoch completed");
      row.metrics = t.best_val;
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

}  // namespace dialgraph

// netsentry command-line driver: capture -> flows -> sequences -> model ->
// reports, plus the synthetic corpus and slow-down evasion tools.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>

#include "netsentry/netsentry.hpp"

namespace fs = std::filesystem;
using namespace netsentry;

namespace {

bool g_quiet = false;

void log(const std::string &msg) {
  if (!g_quiet) std::cerr << "netsentry: " << msg << '\n';
}

// Relative output paths land under NETSENTRY_OUTPUT_DIR when it is set.
std::string out_path(const std::string &p) {
  if (p.empty() || p == "-" || fs::path(p).is_absolute()) return p;
  if (auto dir = env_path("NETSENTRY_OUTPUT_DIR")) {
    fs::create_directories(*dir);
    return (fs::path(*dir) / p).string();
  }
  return p;
}

void write_json(const std::string &path, const nlohmann::json &j) {
  if (path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(out_path(path));
  if (!out) throw FormatError("cannot write " + path);
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(path + ": " + e.what());
  }
}

// Flag values; unset optionals leave the config untouched.
struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> alpha;
  std::optional<double> tau_s;
  std::optional<double> l2, lr;
  std::optional<std::size_t> epochs, batch_size;
  std::optional<std::string> nll;
  std::optional<double> threshold, target_fpr;
};

PipelineConfig resolve(const Flags &f) {
  PipelineConfig c;
  std::string path = f.config;
  if (path.empty())
    if (auto p = env_path("NETSENTRY_CONFIG")) path = *p;
  if (!path.empty()) {
    c = load_config(path);
    log("config " + path);
  }
  apply_override(c, "seed", c.seed, f.seed, log);
  apply_override(c, "sequence.alpha", c.sequence.alpha, f.alpha, log);
  std::optional<std::int64_t> tau;
  if (f.tau_s) tau = static_cast<std::int64_t>(std::llround(*f.tau_s * 1e6));
  apply_override(c, "sequence.tau_s", c.sequence.tau_us, tau, log);
  apply_override(c, "train.l2", c.train.l2, f.l2, log);
  apply_override(c, "train.lr", c.train.lr, f.lr, log);
  apply_override(c, "train.epochs", c.train.epochs, f.epochs, log);
  apply_override(c, "train.batch_size", c.train.batch_size, f.batch_size, log);
  std::optional<NllReduction> nll;
  if (f.nll) nll = nll_reduction_from(*f.nll);
  apply_override(c, "train.nll", c.train.reduction, nll, log);
  apply_override(c, "evaluate.threshold", c.evaluate.threshold, f.threshold, log);
  apply_override(c, "evaluate.target_fpr", c.evaluate.target_fpr, f.target_fpr, log);
  c.train.seed = c.seed;
  c.train.validate();
  if (c.sequence.alpha < 1) throw ConfigError("--alpha must be >= 1");
  if (c.sequence.tau_us <= 0) throw ConfigError("--tau must be > 0");
  return c;
}

std::vector<FeatureVector> flows_from(const std::vector<PacketRecord> &packets, const std::vector<LabelRule> &rules,
                                      const FlowConfig &cfg) {
  std::vector<FeatureVector> out;
  for (const auto &f : aggregate_flows(packets, cfg)) out.push_back(extract_features(f));
  assign_labels(out, rules);
  return out;
}

// Original attack names of the real rows, in predict() order.
std::vector<std::string> specific_labels(std::span<const FlowSequence> seqs) {
  std::vector<std::string> out;
  for (const auto &s : seqs)
    for (std::size_t t = 0; t < s.alpha(); ++t)
      if (s.pad_mask[t]) out.push_back(s.labels[t]);
  return out;
}

nlohmann::json report_json(const EvaluationReport &r, const nlohmann::json &meta) {
  auto j = to_json(r);
  j["meta"] = meta;
  return j;
}

EvaluationReport evaluate_file(Checkpoint &ck, const std::string &seq_path, const PipelineConfig &c) {
  const auto seqs = read_sequences(seq_path);
  if (seqs.empty()) throw PreconditionError(seq_path + ": no sequences");
  const auto data = encode_all(seqs, ck.normalizer);
  const auto specific = specific_labels(seqs);
  return evaluate(ck.model, data, c.evaluate.threshold, specific, c.evaluate.target_fpr);
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"netsentry: flow-sequence intrusion detection with a bidirectional asymmetric LSTM"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags flags;
  app.add_option("--config", flags.config, "JSON config file (default: $NETSENTRY_CONFIG)")->check(CLI::ExistingFile);
  app.add_flag("-q,--quiet", g_quiet, "suppress progress logging");

  auto seed_opt = [&](CLI::App *sub) { sub->add_option("--seed", flags.seed, "master seed for every random substream"); };

  // extract
  std::string in_path, out, rules_path, rules_out, second_path, model_path;
  auto *extract = app.add_subcommand("extract", "capture (pcap, pcapng or packet CSV) -> flow CSV");
  extract->add_option("capture", in_path, "input capture")->required()->check(CLI::ExistingFile);
  extract->add_option("-o,--output", out, "flow CSV")->required();
  extract->add_option("--rules", rules_path, "label rules JSON")->check(CLI::ExistingFile);

  // sequence
  double split = 0;
  std::string test_out;
  auto *sequence = app.add_subcommand("sequence", "flow CSV -> sequence file");
  sequence->add_option("flows", in_path, "flow CSV")->required()->check(CLI::ExistingFile);
  sequence->add_option("-o,--output", out, "sequence file (training part when --split is given)")->required();
  sequence->add_option("--alpha", flags.alpha, "window size (default 10)");
  sequence->add_option("--tau", flags.tau_s, "sequence timeout in seconds (default 30)");
  sequence->add_option("--split", split, "time-split ratio for the training part")->check(CLI::Range(0.0, 1.0));
  sequence->add_option("--test-output", test_out, "sequence file for the held-out part");

  // augment
  std::string augbase_in, augbase_out;
  auto *augment = app.add_subcommand("augment", "sequence file -> augmented sequence file");
  augment->add_option("sequences", in_path, "training sequence file")->required()->check(CLI::ExistingFile);
  augment->add_option("-o,--output", out, "augmented sequence file")->required();
  augment->add_option("--augbase", augbase_in, "reuse an AugBase CSV instead of building one")->check(CLI::ExistingFile);
  augment->add_option("--augbase-output", augbase_out, "write the AugBase used");
  seed_opt(augment);

  // train
  auto *trainc = app.add_subcommand("train", "sequence file -> checkpoint");
  trainc->add_option("sequences", in_path, "training sequence file")->required()->check(CLI::ExistingFile);
  trainc->add_option("-o,--output", out, "checkpoint JSON")->required();
  trainc->add_option("--l2", flags.l2, "L2 penalty weight (default 0.5)");
  trainc->add_option("--lr", flags.lr, "Adam learning rate (default 0.001)");
  trainc->add_option("--epochs", flags.epochs, "passes over the data (default 10)");
  trainc->add_option("--batch-size", flags.batch_size, "sequences per Adam step (default 32)");
  trainc->add_option("--nll", flags.nll, "combine per-timestep NLL terms by 'sum' (default) or 'mean'")
      ->check(CLI::IsMember({"sum", "mean"}));
  seed_opt(trainc);

  // evaluate
  std::string roc_out, ecdf_out, name;
  auto *evaluatec = app.add_subcommand("evaluate", "checkpoint + sequence file -> report");
  evaluatec->add_option("checkpoint", model_path, "checkpoint JSON")->required()->check(CLI::ExistingFile);
  evaluatec->add_option("sequences", in_path, "sequence file")->required()->check(CLI::ExistingFile);
  evaluatec->add_option("-o,--output", out, "report JSON ('-' for stdout)")->required();
  evaluatec->add_option("--roc", roc_out, "ROC points CSV");
  evaluatec->add_option("--ecdf", ecdf_out, "per-type anomaly-score ECDF CSV");
  evaluatec->add_option("--threshold", flags.threshold, "anomaly threshold (default 0.5)");
  evaluatec->add_option("--target-fpr", flags.target_fpr, "benign FPR target for the ECDF threshold (default 0.015)");
  evaluatec->add_option("--name", name, "row name used by 'report'");
  std::optional<double> train_variant, test_variant;
  evaluatec->add_option("--train-variant", train_variant, "slow-down multiplier of the training corpus");
  evaluatec->add_option("--test-variant", test_variant, "slow-down multiplier of the test corpus");

  // cross-eval
  auto *cross = app.add_subcommand("cross-eval", "one checkpoint, two corpora -> paired reports");
  cross->add_option("checkpoint", model_path, "checkpoint JSON")->required()->check(CLI::ExistingFile);
  cross->add_option("in-domain", in_path, "held-out sequences from the training corpus")->required()->check(
      CLI::ExistingFile);
  cross->add_option("cross-domain", second_path, "sequences from the other corpus")->required()->check(
      CLI::ExistingFile);
  cross->add_option("-o,--output", out, "paired report JSON")->required();
  cross->add_option("--threshold", flags.threshold, "anomaly threshold (default 0.5)");
  cross->add_option("--name", name, "row name used by 'report'");

  // evade
  double multiplier = 1;
  auto *evade = app.add_subcommand("evade", "corpus -> slowed-down corpus");
  evade->add_option("packets", in_path, "capture or packet CSV")->required()->check(CLI::ExistingFile);
  evade->add_option("rules", rules_path, "label rules JSON")->required()->check(CLI::ExistingFile);
  evade->add_option("--multiplier,-m", multiplier, "attacker gap multiplier, usually 1, 2, 4 or 8")
      ->required()
      ->check(CLI::Range(1.0, 1e6));
  evade->add_option("-o,--output", out, "packet CSV")->required();
  evade->add_option("--rules-output", rules_out, "label rules with widened windows")->required();

  // synth
  std::string spec_path, preset = "standard";
  bool dump_spec = false;
  auto *synth = app.add_subcommand("synth", "scenario -> packet CSV + label rules");
  synth->add_option("spec", spec_path, "scenario JSON (optional)")->check(CLI::ExistingFile);
  synth->add_option("--preset", preset, "standard or cross_domain")->check(CLI::IsMember({"standard", "cross_domain"}));
  synth->add_option("-o,--output", out, "packet CSV")->required();
  synth->add_option("--rules-output", rules_out, "label rules JSON")->required();
  synth->add_flag("--print-spec", dump_spec, "print the resolved scenario to stdout");
  seed_opt(synth);

  // report
  std::vector<std::string> reports;
  std::string layout = "table";
  auto *report = app.add_subcommand("report", "merge reports into comparison tables");
  report->add_option("reports", reports, "report JSON files")->required()->check(CLI::ExistingFile);
  report->add_option("--layout", layout, "'table' (precision/recall/F1 rows) or 'pe' (train x test matrix)")
      ->check(CLI::IsMember({"table", "pe"}));
  report->add_option("-o,--output", out, "also write the table to this file");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = resolve(flags);

    if (*extract) {
      CaptureStats st;
      const auto packets = load_packets(in_path, &st);
      std::vector<LabelRule> rules;
      if (!rules_path.empty()) rules = load_rules(rules_path);
      const auto flows = flows_from(packets, rules, cfg.flow);
      write_flow_csv(out_path(out), flows);
      log(std::to_string(packets.size()) + " packets -> " + std::to_string(flows.size()) + " flows");
    } else if (*sequence) {
      auto flows = read_flow_csv(in_path);
      if (split > 0) {
        if (test_out.empty()) throw ConfigError("--split needs --test-output");
        auto [train_part, test_part] = time_split(std::move(flows), split);
        const auto a = build_sequences(std::move(train_part), cfg.sequence);
        const auto b = build_sequences(std::move(test_part), cfg.sequence);
        write_sequences(out_path(out), a, {{"alpha", cfg.sequence.alpha}, {"part", "train"}});
        write_sequences(out_path(test_out), b, {{"alpha", cfg.sequence.alpha}, {"part", "test"}});
        log(std::to_string(a.size()) + " training / " + std::to_string(b.size()) + " test sequences");
      } else {
        const auto seqs = build_sequences(std::move(flows), cfg.sequence);
        write_sequences(out_path(out), seqs, {{"alpha", cfg.sequence.alpha}});
        log(std::to_string(seqs.size()) + " sequences");
      }
    } else if (*augment) {
      nlohmann::json meta;
      auto seqs = read_sequences(in_path, &meta);
      const auto base = augbase_in.empty() ? build_augbase(cfg.seed, cfg.augbase) : read_augbase_csv(augbase_in);
      if (!augbase_out.empty()) write_augbase_csv(out_path(augbase_out), base);
      auto rng = substream(cfg.seed, stream::AugmentNoise);
      AugmentStats st;
      seqs = augment_training_set(std::move(seqs), base, rng, &st, cfg.augment);
      if (!meta.is_object()) meta = nlohmann::json::object();
      meta["augmented"] = st.augmented;
      meta["augment_seed"] = cfg.seed;
      write_sequences(out_path(out), seqs, meta);
      log("augmented " + std::to_string(st.augmented) + " of " + std::to_string(seqs.size()) + " sequences");
    } else if (*trainc) {
      const auto seqs = read_sequences(in_path);
      const auto norm = fit_normalizer(std::span<const FlowSequence>(seqs));
      const auto data = encode_all(seqs, norm);
      Checkpoint ck{BiALSTM(), norm, cfg.seed, {}};
      log("training on " + std::to_string(seqs.size()) + " sequences, " + std::to_string(ck.model.parameter_count()) +
          " parameters");
      const auto res = train(ck.model, data, cfg.train);
      ck.loss_curve = res.epoch_loss;
      for (std::size_t e = 0; e < res.epoch_loss.size(); ++e)
        log("epoch " + std::to_string(e + 1) + " loss " + fmt(res.epoch_loss[e]));
      save_checkpoint(out_path(out), ck);
      log("checkpoint " + out + " hash " + ck.model.parameter_hash());
    } else if (*evaluatec) {
      auto ck = load_checkpoint(model_path);
      const auto r = evaluate_file(ck, in_path, cfg);
      nlohmann::json meta = {{"name", name.empty() ? fs::path(model_path).stem().string() : name},
                             {"checkpoint", model_path},
                             {"sequences", in_path}};
      if (train_variant) meta["train_variant"] = *train_variant;
      if (test_variant) meta["test_variant"] = *test_variant;
      write_json(out, report_json(r, meta));
      if (!roc_out.empty()) std::ofstream(out_path(roc_out)) << roc_csv(r.roc);
      if (!ecdf_out.empty()) {
        if (!r.ecdf) throw PreconditionError("--ecdf needs benign rows in the evaluated sequences");
        std::ofstream(out_path(ecdf_out)) << ecdf_csv(*r.ecdf);
      }
      std::cerr << to_text(r);
    } else if (*cross) {
      auto ck = load_checkpoint(model_path);
      const auto a = evaluate_file(ck, in_path, cfg);
      const auto b = evaluate_file(ck, second_path, cfg);
      const std::string n = name.empty() ? fs::path(model_path).stem().string() : name;
      write_json(out, {{"format", "netsentry.cross_report"},
                       {"version", 1},
                       {"in_domain", report_json(a, {{"name", n + " (in-domain)"}, {"sequences", in_path}})},
                       {"cross_domain", report_json(b, {{"name", n + " (cross-domain)"}, {"sequences", second_path}})}});
      log("in-domain F1 " + fmt(a.binary.f1) + ", cross-domain F1 " + fmt(b.binary.f1));
    } else if (*evade) {
      const auto packets = load_packets(in_path);
      const auto rules = load_rules(rules_path);
      const auto res = apply_evasion(packets, rules, multiplier, cfg.flow);
      write_packet_csv(out_path(out), res.packets);
      save_rules(out_path(rules_out), res.rules);
      log("slowed " + std::to_string(res.altered_flows) + " malicious flows by x" + fmt(multiplier, 2));
    } else if (*synth) {
      ScenarioSpec spec = preset == "cross_domain" ? ScenarioSpec::cross_domain() : ScenarioSpec::standard();
      if (!spec_path.empty()) spec = scenario_from_json(read_json(spec_path), spec);
      if (flags.seed) spec.seed = *flags.seed;
      if (dump_spec) std::cout << to_json(spec).dump(2) << '\n';
      const auto corpus = generate(spec);
      write_packet_csv(out_path(out), corpus.packets);
      save_rules(out_path(rules_out), corpus.rules);
      log(std::to_string(corpus.packets.size()) + " packets, " + std::to_string(corpus.connections) +
          " connections, " + std::to_string(corpus.rules.size()) + " label rules");
    } else if (*report) {
      std::vector<nlohmann::json> rows;
      for (const auto &p : reports) {
        auto j = read_json(p);
        if (j.value("format", "") == "netsentry.cross_report") {
          rows.push_back(j.at("in_domain"));
          rows.push_back(j.at("cross_domain"));
        } else if (j.value("format", "") == "netsentry.report") {
          rows.push_back(std::move(j));
        } else {
          throw FormatError(p + ": not a netsentry report");
        }
      }
      std::ostringstream os;
      if (layout == "table") {
        os << "| model | flows | precision | recall | F1 | AUC |\n|---|---|---|---|---|---|\n";
        for (const auto &r : rows) {
          const auto meta = r.value("meta", nlohmann::json::object());
          os << "| " << meta.value("name", "?") << " | " << r.at("flows").get<std::size_t>() << " | "
             << fmt(r.at("precision")) << " | " << fmt(r.at("recall")) << " | " << fmt(r.at("f1")) << " | "
             << (r.at("auc").is_null() ? std::string("n/a") : fmt(r.at("auc"))) << " |\n";
        }
      } else {
        std::map<double, std::map<double, double>> f1;
        for (const auto &r : rows) {
          const auto meta = r.value("meta", nlohmann::json::object());
          if (!meta.contains("train_variant") || !meta.contains("test_variant"))
            throw FormatError("pe layout needs reports evaluated with --train-variant and --test-variant");
          f1[meta.at("train_variant").get<double>()][meta.at("test_variant").get<double>()] = r.at("f1");
        }
        std::set<double> tests;
        for (const auto &[tr, row] : f1)
          for (const auto &[te, v] : row) tests.insert(te);
        os << "PE wrt. F1 (%), rows = training variant, columns = test variant\n| train \\ test |";
        for (double te : tests) os << " x" << te << " |";
        os << "\n|---|";
        for (std::size_t i = 0; i < tests.size(); ++i) os << "---|";
        os << '\n';
        for (const auto &[tr, row] : f1) {
          os << "| x" << tr << " |";
          const auto base = row.find(tr);
          for (double te : tests) {
            const auto it = row.find(te);
            std::optional<double> pe;
            if (it != row.end() && base != row.end()) pe = te == tr ? 0.0 : percentage_error_f1(it->second, base->second);
            os << ' ' << (pe ? fmt(*pe, 2) : std::string("n/a")) << " |";
          }
          os << '\n';
        }
      }
      std::cout << os.str();
      if (!out.empty()) std::ofstream(out_path(out)) << os.str();
    }
  } catch (const ConfigError &e) {
    std::cerr << "netsentry: configuration error: " << e.what() << '\n';
    return 2;
  } catch (const Error &e) {
    std::cerr << "netsentry: " << e.what() << '\n';
    return 1;
  } catch (const std::exception &e) {
    std::cerr << "netsentry: unexpected error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

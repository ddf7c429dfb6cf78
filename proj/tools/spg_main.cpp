// Command-line front end. One executable, one subcommand per lab operation;
// every command refuses to clobber existing outputs unless --overwrite.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "spg/codec/bitstream.hpp"
#include "spg/codec/codec.hpp"
#include "spg/corpus/corpus.hpp"
#include "spg/dsp/wav.hpp"
#include "spg/eval/evaluate.hpp"
#include "spg/eval/metrics.hpp"
#include "spg/lab/recipe.hpp"
#include "spg/lab/report.hpp"
#include "spg/priors/train.hpp"
#include "spg/trainer/trainer.hpp"
#include "spg/util/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace spg;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError(path + " is not valid JSON: " + std::string(e.what()));
  }
  return j;
}

void refuse_clobber(const std::string& path, bool overwrite) {
  if (!fs::exists(path)) return;
  if (!overwrite) throw ConfigError(path + " exists; pass --overwrite to replace it");
  fs::remove_all(path);
}

// Output root fallback so recipes can be launched without spelling paths.
std::string default_root() {
  const char* env = std::getenv("SPG_OUT_ROOT");
  return env ? std::string(env) : std::string("out");
}

void ensure_parent(const std::string& path) {
  fs::path p = fs::path(path).parent_path();
  if (!p.empty()) fs::create_directories(p);
}

struct EncodedFile {
  codec::BitstreamHeader header;
  std::string raw;
};

EncodedFile encode_wav(codec::Codec<float>& cod, const codec::Tier& tier,
                       const std::string& wav_path) {
  auto wav = dsp::read_wav(wav_path);
  if (wav.sample_rate != cod.config().sample_rate)
    throw ConfigError(wav_path + " is " + std::to_string(wav.sample_rate) +
                      " Hz; the codec expects " + std::to_string(cod.config().sample_rate) +
                      " Hz and never resamples implicitly");
  if (tier.n_q > cod.config().n_q_max)
    throw ConfigError("tier " + tier.name + " needs " + std::to_string(tier.n_q) +
                      " stages; this model has " + std::to_string(cod.config().n_q_max));
  Mat<float> x = codec::to_model_input<float>(wav.samples, cod.config().hop());
  auto res = cod.rvq.quantize(cod.encode_latent(x), tier.n_q);
  EncodedFile out;
  out.header.K = uint32_t(cod.config().K);
  out.header.n_q = uint16_t(tier.n_q);
  out.header.frame_rate = uint32_t(cod.config().frame_rate);
  out.header.latent_frames = uint32_t(res.indices.cols);
  out.header.orig_samples = uint32_t(wav.samples.size());
  out.raw = codec::pack_bitstream(out.header, res.indices);
  return out;
}

std::vector<float> decode_raw(codec::Codec<float>& cod, const std::string& raw) {
  Mat<int> indices;
  codec::BitstreamHeader h = codec::unpack_bitstream(raw, indices);
  if (int(h.K) != cod.config().K || int(h.frame_rate) != cod.config().frame_rate)
    throw DataError("bitstream was produced for a different codec family");
  Mat<float> y = cod.decode_latent(cod.rvq.dequantize(indices));
  if (y.cols < int(h.orig_samples)) throw DataError("decoded signal shorter than coded source");
  return std::vector<float>(y.v.begin(), y.v.begin() + h.orig_samples);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale lab for semantic-prior-guided neural speech coding"};
  app.require_subcommand(1);
  std::function<void()> run;

  // synth-data
  {
    auto* c = app.add_subcommand("synth-data", "build a synthetic labeled corpus");
    auto cfg_path = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto overwrite = std::make_shared<bool>(false);
    c->add_option("--config", *cfg_path, "corpus config (json)")->required();
    c->add_option("--out", *out, "output directory")->required();
    c->add_flag("--overwrite", *overwrite, "replace an existing corpus");
    c->callback([=] {
      run = [=] {
        refuse_clobber(*out + "/manifest.jsonl", *overwrite);
        corpus::build_corpus(corpus::load_corpus_config(*cfg_path), *out);
        std::cout << "corpus written to " << *out << "\n";
      };
    });
  }

  // train-prior
  {
    auto* c = app.add_subcommand("train-prior", "train one semantic prior and probe its gate");
    auto kind = std::make_shared<std::string>();
    auto cfg_path = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto overwrite = std::make_shared<bool>(false);
    c->add_option("--kind", *kind, "acoustic or linguistic")->required();
    c->add_option("--config", *cfg_path, "prior training config (json)");
    c->add_option("--out", *out, "checkpoint path")->required();
    c->add_flag("--overwrite", *overwrite);
    c->callback([=] {
      run = [=] {
        refuse_clobber(*out, *overwrite);
        priors::PriorTrainConfig pc;
        if (!cfg_path->empty()) pc = priors::prior_train_config_from_json(read_json_file(*cfg_path));
        pc.kind = priors::prior_kind_from_string(*kind);
        ensure_parent(*out);
        auto gate = priors::train_prior(pc, *out, std::cout);
        std::cout << "gate " << (gate.passed ? "passed" : "FAILED") << ": " << gate.detail << "\n";
        if (!gate.passed) throw GateFailure("prior gate unmet: " + gate.detail);
      };
    });
  }

  // train-eval
  {
    auto* c = app.add_subcommand("train-eval", "train a judge model (recognizer or embedder)");
    auto what = std::make_shared<std::string>();
    auto cfg_path = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto overwrite = std::make_shared<bool>(false);
    c->add_option("--what", *what, "recognizer or embedder")->required();
    c->add_option("--config", *cfg_path, "judge training config (json)");
    c->add_option("--out", *out, "checkpoint path")->required();
    c->add_flag("--overwrite", *overwrite);
    c->callback([=] {
      run = [=] {
        refuse_clobber(*out, *overwrite);
        eval::EvalModelConfig ec;
        if (!cfg_path->empty()) ec = eval::eval_model_config_from_json(read_json_file(*cfg_path));
        ensure_parent(*out);
        double acc = 0.0, floor = 0.0;
        if (*what == "recognizer") {
          acc = eval::train_recognizer(ec, *out, std::cout);
          floor = ec.recognizer_min_acc;
        } else if (*what == "embedder") {
          acc = eval::train_embedder(ec, *out, std::cout);
          floor = ec.embedder_min_acc;
        } else {
          throw ConfigError("--what must be recognizer or embedder");
        }
        std::cout << "held-out accuracy " << acc << " (floor " << floor << ")\n";
        if (acc < floor)
          throw GateFailure(*what + " accuracy " + std::to_string(acc) + " below floor");
      };
    });
  }

  // train-codec
  {
    auto* c = app.add_subcommand("train-codec", "train one codec arm");
    auto cfg_path = std::make_shared<std::string>();
    auto corpus_d = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto overwrite = std::make_shared<bool>(false);
    c->add_option("--config", *cfg_path, "trainer config (json)")->required();
    c->add_option("--corpus", *corpus_d, "corpus directory")->required();
    c->add_option("--out", *out, "run directory (checkpoints, log)")->required();
    c->add_flag("--overwrite", *overwrite, "discard a previous run at --out");
    c->callback([=] {
      run = [=] {
        if (*overwrite) fs::remove_all(*out);
        auto tc = trainer::train_config_from_json(read_json_file(*cfg_path));
        auto stats = trainer::train_codec(tc, *corpus_d, *out, std::cout);
        std::cout << (stats.already_complete ? "already complete at " : "finished ")
                  << stats.checkpoint_path << "\n";
      };
    });
  }

  // encode
  {
    auto* c = app.add_subcommand("encode", "wav -> bitstream at one tier");
    auto model = std::make_shared<std::string>();
    auto tier = std::make_shared<std::string>();
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto overwrite = std::make_shared<bool>(false);
    c->add_option("--model", *model, "codec checkpoint")->required();
    c->add_option("--tier", *tier, "bitrate tier, e.g. 3kbps")->required();
    c->add_option("--in", *in, "input wav (16 kHz mono)")->required();
    c->add_option("--out", *out, "bitstream file")->required();
    c->add_flag("--overwrite", *overwrite);
    c->callback([=] {
      run = [=] {
        refuse_clobber(*out, *overwrite);
        auto [cod, meta] = codec::load_codec<float>(*model);
        auto enc = encode_wav(*cod, codec::tier_by_name(*tier), *in);
        ensure_parent(*out);
        codec::write_bitstream_file(*out, enc.raw);
        std::cout << "wrote " << enc.raw.size() << " bytes, "
                  << codec::realized_kbps(enc.raw.size(), enc.header.latent_frames,
                                          enc.header.frame_rate)
                  << " kbps realized\n";
      };
    });
  }

  // decode
  {
    auto* c = app.add_subcommand("decode", "bitstream -> wav");
    auto model = std::make_shared<std::string>();
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto overwrite = std::make_shared<bool>(false);
    c->add_option("--model", *model, "codec checkpoint")->required();
    c->add_option("--in", *in, "bitstream file")->required();
    c->add_option("--out", *out, "output wav")->required();
    c->add_flag("--overwrite", *overwrite);
    c->callback([=] {
      run = [=] {
        refuse_clobber(*out, *overwrite);
        auto [cod, meta] = codec::load_codec<float>(*model);
        auto y = decode_raw(*cod, codec::read_bitstream_file(*in));
        ensure_parent(*out);
        dsp::write_wav(*out, y.data(), int(y.size()), cod->config().sample_rate);
        std::cout << "wrote " << y.size() << " samples\n";
      };
    });
  }

  // roundtrip
  {
    auto* c = app.add_subcommand("roundtrip", "encode then decode, report rate and fidelity");
    auto model = std::make_shared<std::string>();
    auto tier = std::make_shared<std::string>();
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto overwrite = std::make_shared<bool>(false);
    c->add_option("--model", *model, "codec checkpoint")->required();
    c->add_option("--tier", *tier, "bitrate tier")->required();
    c->add_option("--in", *in, "input wav (16 kHz mono)")->required();
    c->add_option("--out", *out, "decoded wav")->required();
    c->add_flag("--overwrite", *overwrite);
    c->callback([=] {
      run = [=] {
        refuse_clobber(*out, *overwrite);
        auto [cod, meta] = codec::load_codec<float>(*model);
        auto enc = encode_wav(*cod, codec::tier_by_name(*tier), *in);
        auto y = decode_raw(*cod, enc.raw);
        ensure_parent(*out);
        dsp::write_wav(*out, y.data(), int(y.size()), cod->config().sample_rate);
        auto wav = dsp::read_wav(*in);
        double kbps = codec::realized_kbps(enc.raw.size(), enc.header.latent_frames,
                                           enc.header.frame_rate);
        double sdr = eval::si_sdr(wav.samples.data(), y.data(), int(y.size()));
        std::cout << *tier << ": " << kbps << " kbps realized, si-sdr " << sdr << " dB\n";
      };
    });
  }

  // evaluate
  {
    auto* c = app.add_subcommand("evaluate", "compose one protocol table from recipe artifacts");
    auto root = std::make_shared<std::string>(default_root());
    auto protocol = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto overwrite = std::make_shared<bool>(false);
    c->add_option("--root", *root, "recipe output root (default $SPG_OUT_ROOT or ./out)");
    c->add_option("--protocol", *protocol, "retirement, noise, gap, alpha or shuffle")->required();
    c->add_option("--out", *out, "output directory (default <root>/report)");
    c->add_flag("--overwrite", *overwrite);
    c->callback([=] {
      run = [=] {
        std::string dir = out->empty() ? *root + "/report" : *out;
        std::string path = dir + "/" + *protocol + ".csv";
        refuse_clobber(path, *overwrite);
        fs::create_directories(dir);
        lab::write_protocol_csv(*root, *protocol, path);
        std::cout << "wrote " << path << "\n";
      };
    });
  }

  // report
  {
    auto* c = app.add_subcommand("report", "compose all protocol tables and the summary");
    auto root = std::make_shared<std::string>(default_root());
    auto out = std::make_shared<std::string>();
    auto overwrite = std::make_shared<bool>(false);
    c->add_option("--root", *root, "recipe output root (default $SPG_OUT_ROOT or ./out)");
    c->add_option("--out", *out, "output directory (default <root>/report)");
    c->add_flag("--overwrite", *overwrite);
    c->callback([=] {
      run = [=] {
        std::string dir = out->empty() ? *root + "/report" : *out;
        refuse_clobber(dir + "/summary.json", *overwrite);
        lab::compose_report(*root, dir, std::cout);
      };
    });
  }

  // sweep
  {
    auto* c = app.add_subcommand("sweep", "run only the semantic-weight sweep arms of a recipe");
    auto cfg_path = std::make_shared<std::string>();
    auto root = std::make_shared<std::string>(default_root());
    auto jobs = std::make_shared<int>(1);
    c->add_option("--config", *cfg_path, "recipe config (json)");
    c->add_option("--root", *root, "output root (default $SPG_OUT_ROOT or ./out)");
    c->add_option("--jobs", *jobs, "parallelism bound (results never depend on it)");
    c->callback([=] {
      run = [=] {
        lab::RecipeConfig rc;
        if (!cfg_path->empty()) rc = lab::recipe_config_from_json(read_json_file(*cfg_path));
        std::vector<lab::ArmSpec> keep;
        for (const auto& a : rc.arms)
          if (a.name == "baseline" || a.name.rfind("alpha_", 0) == 0) keep.push_back(a);
        if (keep.empty()) throw ConfigError("recipe has no baseline or alpha_* arms to sweep");
        rc.arms = keep;
        rc.noise_arms.clear();
        auto st = lab::run_recipe(rc, *root, std::cout);
        fs::create_directories(*root + "/report");
        lab::write_protocol_csv(*root, "alpha", *root + "/report/alpha.csv");
        std::cout << "sweep done: " << st.trained_arms.size() << " arms, table at " << *root
                  << "/report/alpha.csv\n";
        if (!st.failed_arms.empty()) throw TrainingAbort("some sweep arms failed; see log");
      };
    });
  }

  // run-recipe
  {
    auto* c = app.add_subcommand("run-recipe", "run the whole lab from one recipe file");
    auto cfg_path = std::make_shared<std::string>();
    auto root = std::make_shared<std::string>(default_root());
    auto jobs = std::make_shared<int>(1);
    auto skip_report = std::make_shared<bool>(false);
    c->add_option("--config", *cfg_path, "recipe config (json); defaults cover the full matrix");
    c->add_option("--root", *root, "output root (default $SPG_OUT_ROOT or ./out)");
    c->add_option("--jobs", *jobs, "parallelism bound (results never depend on it)");
    c->add_flag("--skip-report", *skip_report, "stop after evaluations");
    c->callback([=] {
      run = [=] {
        lab::RecipeConfig rc;
        if (!cfg_path->empty()) rc = lab::recipe_config_from_json(read_json_file(*cfg_path));
        auto st = lab::run_recipe(rc, *root, std::cout);
        if (!*skip_report && !st.trained_arms.empty())
          lab::compose_report(*root, *root + "/report", std::cout);
        if (!st.failed_arms.empty())
          throw TrainingAbort(std::to_string(st.failed_arms.size()) +
                              " arm(s) failed; rerun resumes the rest");
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    run();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const GateFailure& e) {
    std::cerr << "gate failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}

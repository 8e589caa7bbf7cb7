#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <cmath>
#include <sstream>

#include "crl/cli/commands.hpp"
#include "crl/numkit/rng.hpp"

using namespace crl;
using namespace crl::cli;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct CliRun {
  int code;
  std::string out, err;
};

CliRun invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "crl");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

const char* kTinyConfig = R"(# tiny end-to-end run
[run]
seed = 3
[corpus]
size = 128
[vae]
batch_size = 8
max_steps = 200
eval_every = 100
[surrogate]
max_steps = 200
[denoiser]
hidden = 32
[ldm]
max_steps = 100
[grpo]
max_steps = 2
group_size = 4
conditions_per_step = 2
)";

}  // namespace

TEST_CASE("config defaults carry the published hyperparameters") {
  const RunConfig c = default_config();
  CHECK(c.vae.latent_dim == 8);
  CHECK(c.vae_train.weights.species == 1.0);
  CHECK(c.vae_train.weights.lengths == 1.0);
  CHECK(c.vae_train.weights.angles == 10.0);
  CHECK(c.vae_train.weights.coords == 10.0);
  CHECK(c.vae_train.weights.kl == 1e-5);
  CHECK(c.diffusion.T == 1000);
  CHECK(c.diffusion.sample_steps == 50);
  CHECK(c.grpo.objective.clip_eps == 1e-3);
  CHECK(c.grpo.objective.kl_weight == 1.0);
  CHECK(c.grpo.objective.entropy_weight == 1e-5);
  CHECK(c.grpo.lr == 1e-5);
  CHECK(c.grpo.patience == 500);
  CHECK(c.grpo.inner_batches == 2);
  CHECK(c.grpo.rollout_steps == 50);
  CHECK(c.rewards.weights.creativity == 1.0);
  CHECK(c.rewards.weights.stability == 1.0);
  CHECK(c.rewards.weights.comp_diversity == 1.0);
  CHECK(c.rewards.weights.struct_diversity == 0.1);
  CHECK(c.guidance.scale == 2.0);
  CHECK(c.property.target == 3.0);
  CHECK(c.property.w_gap == 1.0);
  CHECK(c.property.w_div == 0.5);
  CHECK(c.eval.metastable_threshold == 0.1);
  CHECK(to_toml(c).find("group_size = 16  # published: 64") != std::string::npos);
}

TEST_CASE("config round trip") {
  const RunConfig base = default_config(11);
  CHECK(to_toml(parse_config(to_toml(base))) == to_toml(base));

  nk::RngStream rng(5, "config");
  for (int round = 0; round < 30; ++round) {
    RunConfig c = default_config(rng.below(1000));
    c.grpo.lr = rng.uniform() * 1e-3;
    c.grpo.group_size = 2 + rng.below(100);
    c.grpo.algorithm = rng.below(2) ? grpo::Algorithm::Grpo : grpo::Algorithm::Reinforce;
    c.rewards.diversity = rng.below(2) == 0;
    c.vae_train.weights.kl = rng.uniform() * 1e-3;
    c.property.target = 6.0 * rng.uniform();
    c.out_dir = "runs/dir \"q\" " + std::to_string(round);
    c.corpus.seed = 1ull << 60 | rng.below(1u << 20);
    const std::string text = to_toml(c);
    const RunConfig back = parse_config(text);
    CHECK(to_toml(back) == text);
    CHECK(back.grpo.lr == c.grpo.lr);
    CHECK(back.corpus.seed == c.corpus.seed);
    CHECK(back.out_dir == c.out_dir);
  }
}

TEST_CASE("config seeds and validation") {
  const RunConfig c = parse_config("[run]\nseed = 42\n[grpo]\nseed = 5\n");
  CHECK(c.corpus.seed == 42);
  CHECK(c.vae_train.seed == 42);
  CHECK(c.ldm.seed == 42);
  CHECK(c.grpo.seed == 5);

  auto key_of = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return e.key();
    }
    return std::string("<accepted>");
  };
  CHECK(key_of("[grpo]\nbogus = 1\n") == "grpo.bogus");
  CHECK(key_of("[nope]\n") == "nope");
  CHECK(key_of("[grpo]\nlr = \"fast\"\n") == "grpo.lr");
  CHECK(key_of("[grpo]\ngroup_size = -4\n") == "grpo.group_size");
  CHECK(key_of("[grpo]\ngroup_size = 1\n") == "grpo.group_size");
  CHECK(key_of("[grpo]\nalgorithm = \"ppo\"\n") == "grpo.algorithm");
  CHECK(key_of("[grpo]\nlr = 1e-5\nlr = 2e-5\n") == "grpo.lr");
  CHECK(key_of("seed = 1\n") == "seed");
  CHECK(key_of("[rewards]\ndiversity = 1\n") == "rewards.diversity");
  CHECK(key_of("[diffusion]\nsample_steps = 0\n") == "diffusion.sample_steps");
  CHECK(key_of("[grpo] # comment\nlr = 2e-5 # faster\n") == "<accepted>");
}

TEST_CASE("tensor archive") {
  TempDir dir("crl_cli_archive");
  nk::RngStream rng(1, "archive");
  TensorArchive a;
  a.meta = {{"stage", "x"}};
  a.tensors["a"] = rng.normal({3, 4});
  a.tensors["b/c"] = rng.normal({7});
  a.tensors["scalar"] = nk::Tensor({}, {-0.0});
  const auto path = dir.path / "t.ckpt";
  write_archive(path, a);
  const auto back = read_archive(path);
  CHECK(back.meta == a.meta);
  REQUIRE(back.tensors.size() == 3);
  for (const auto& [name, t] : a.tensors) CHECK(back.tensors.at(name) == t);
  CHECK(std::signbit(back.tensors.at("scalar").data()[0]));

  const std::string bytes = slurp(path);
  std::ofstream(dir.path / "cut.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() - 5);
  CHECK_THROWS_AS(read_archive(dir.path / "cut.ckpt"), CheckpointError);
  write_file(dir.path / "junk.ckpt", "not a checkpoint");
  CHECK_THROWS_AS(read_archive(dir.path / "junk.ckpt"), CheckpointError);
  CHECK_THROWS_AS(read_archive(dir.path / "absent.ckpt"), CheckpointError);
}

TEST_CASE("exit codes") {
  TempDir dir("crl_cli_exit");
  write_file(dir.path / "bad.toml", "[grpo]\nclip = 0.2\n");
  auto r = invoke({"train-vae", "--config", (dir.path / "bad.toml").string()});
  CHECK(r.code == kBadConfig);
  CHECK(r.err.find("grpo.clip") != std::string::npos);

  r = invoke({"sample", "--ckpt", (dir.path / "none.ckpt").string(), "--out", (dir.path / "s.jsonl").string()});
  CHECK(r.code == kMissingCheckpoint);
  r = invoke({"train-ldm", "--out", dir.path.string()});
  CHECK(r.code == kMissingCheckpoint);
  CHECK(invoke({"rl-finetune", "--algo", "ppo"}).code == kBadConfig);
  CHECK(invoke({"frobnicate"}).code == kBadConfig);
  CHECK(invoke({"--help"}).code == kOk);
}

TEST_CASE("tiny pipeline is reproducible") {
  TempDir dir("crl_cli_pipeline");
  write_file(dir.path / "tiny.toml", kTinyConfig);
  const std::string cfg = (dir.path / "tiny.toml").string();
  for (const char* run : {"a", "b"}) {
    const std::string out = (dir.path / run).string();
    REQUIRE(invoke({"gen-data", "--config", cfg, "--out", out}).code == kOk);
    REQUIRE(invoke({"--threads", "2", "train-vae", "--config", cfg, "--out", out}).code == kOk);
    REQUIRE(invoke({"train-ldm", "--config", cfg, "--out", out, "--cfg-dropout"}).code == kOk);
    REQUIRE(invoke({"rl-finetune", "--config", cfg, "--out", out, "--algo", "reinforce"}).code == kOk);
    REQUIRE(invoke({"sample", "--ckpt", out + "/rl_reinforce.ckpt", "--n", "24", "--seed", "4", "--out",
                 out + "/samples.jsonl"})
                .code == kOk);
    REQUIRE(invoke({"sample", "--ckpt", out + "/ldm.ckpt", "--n", "8", "--guidance-scale", "2", "--cond-bandgap", "3",
                 "--out", out + "/guided.jsonl"})
                .code == kOk);
    const auto ev = invoke({"evaluate", "--samples", out + "/samples.jsonl", "--corpus", out + "/corpus.jsonl", "--ckpt",
                         out + "/vae.ckpt", "--out", out + "/report.json"});
    REQUIRE(ev.code == kOk);
    CHECK(ev.out.find("\"msun\"") != std::string::npos);
    REQUIRE(invoke({"export-embeddings", "--samples", out + "/samples.jsonl", "--ckpt", out + "/vae.ckpt", "--corpus",
                 out + "/corpus.jsonl", "--out", out + "/emb.csv"})
                .code == kOk);
  }
  CHECK(invoke({"sample", "--ckpt", (dir.path / "a/ldm.ckpt").string(), "--guidance-scale", "2", "--out",
             (dir.path / "x.jsonl").string()})
            .code == kBadConfig);
  for (const char* file : {"corpus.jsonl", "hull_refs.jsonl", "vae.ckpt", "ldm.ckpt", "rl_reinforce.ckpt",
                           "rl_reinforce.csv", "samples.jsonl", "guided.jsonl", "report.json", "emb.csv"}) {
    INFO(file);
    CHECK(fs::exists(dir.path / "a" / file));
    CHECK(slurp(dir.path / "a" / file) == slurp(dir.path / "b" / file));
  }
  const RunConfig resolved = load_config(dir.path / "a/config_rl-finetune-reinforce.toml");
  CHECK(resolved.grpo.max_steps == 2);
  CHECK(resolved.out_dir == (dir.path / "a").string());
}

#include <doctest.h>

#include <clocale>
#include <filesystem>
#include <fstream>
#include <set>

#include "micro_config.hpp"
#include "plab/checkpoint.hpp"
#include "plab/config.hpp"
#include "plab/error.hpp"
#include "plab/rng.hpp"
#include "plab/trajectory.hpp"

using namespace plab;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("plab_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<char> read_bytes(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    return std::vector<char>((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void write_bytes(const fs::path& path, const std::vector<char>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

} // namespace

TEST_CASE("tensor container round trips bitwise") {
    const fs::path dir = temp_dir("tensors");
    Rng rng(3);
    NamedTensors tensors;
    Tensor a(3, 5), b(1, 1);
    for (double& x : a.data) x = rng.normal() * 1e-7;
    b.data[0] = -0.1;
    tensors.emplace_back("alpha", a);
    tensors.emplace_back("beta", b);

    save_tensors(tensors, dir / "t.plab");
    const NamedTensors loaded = load_tensors(dir / "t.plab");
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].first == "alpha");
    CHECK(loaded[0].second == a);
    CHECK(loaded[1].second == b);
}

TEST_CASE("a flipped payload byte is rejected as a checksum mismatch") {
    const fs::path dir = temp_dir("corrupt");
    save_tensors({{"x", Tensor(2, 2, {1, 2, 3, 4})}}, dir / "t.plab");
    std::vector<char> bytes = read_bytes(dir / "t.plab");
    bytes[bytes.size() / 2] ^= 0x20;
    write_bytes(dir / "t.plab", bytes);
    CHECK_THROWS_WITH_AS(load_tensors(dir / "t.plab"),
                         doctest::Contains("checksum mismatch"), Error);
}

TEST_CASE("unsupported version and bad magic are distinct errors") {
    const fs::path dir = temp_dir("version");
    save_tensors({{"x", Tensor(1, 1, {1})}}, dir / "t.plab");
    std::vector<char> bytes = read_bytes(dir / "t.plab");
    bytes[4] = 9; // version word
    write_bytes(dir / "v.plab", bytes);
    CHECK_THROWS_WITH_AS(load_tensors(dir / "v.plab"), doctest::Contains("unsupported version"),
                         Error);

    bytes[4] = 1;
    bytes[0] = 'X';
    write_bytes(dir / "m.plab", bytes);
    CHECK_THROWS_WITH_AS(load_tensors(dir / "m.plab"), doctest::Contains("bad magic"), Error);
}

TEST_CASE("empty and truncated files fail with structured errors") {
    const fs::path dir = temp_dir("trunc");
    write_bytes(dir / "empty.plab", {});
    CHECK_THROWS_WITH_AS(load_tensors(dir / "empty.plab"), doctest::Contains("too short"), Error);

    save_tensors({{"x", Tensor(4, 4)}}, dir / "t.plab");
    std::vector<char> bytes = read_bytes(dir / "t.plab");
    bytes.resize(bytes.size() - 9);
    write_bytes(dir / "cut.plab", bytes);
    CHECK_THROWS_AS(load_tensors(dir / "cut.plab"), Error);

    CHECK_THROWS_WITH_AS(load_tensors(dir / "missing.plab"), doctest::Contains("cannot open"), Error);
}

TEST_CASE("checkpoints round trip through the encoder parameter names") {
    const fs::path dir = temp_dir("ckpt");
    const DualEncoderParams p = init_dual_encoder(MlpConfig{{6, 8, 3}}, MlpConfig{{5, 8, 3}}, 77);
    save_checkpoint(p, dir / "p.plab");
    const DualEncoderParams q = load_checkpoint(dir / "p.plab");
    const auto tp = param_tensors(p);
    const auto tq = param_tensors(q);
    REQUIRE(tp.size() == tq.size());
    for (std::size_t i = 0; i < tp.size(); ++i) CHECK(*tp[i] == *tq[i]);
    CHECK(param_names(p) == param_names(q));
}

TEST_CASE("datasets round trip with labels and flags") {
    const fs::path dir = temp_dir("dataset");
    WorldSpec spec;
    spec.num_classes = 3;
    spec.d_img = 8;
    spec.d_txt = 6;
    spec.seed = 4;
    PairedDataset ds = generate(spec, 25);
    const TemplateBank bank = make_templates(spec, 2);
    Rng rng(9);
    poison(ds, make_trigger(3, 0, 2), 5, bank, rng);

    save_dataset(ds, dir / "d.plab");
    const PairedDataset loaded = load_dataset(dir / "d.plab");
    CHECK(loaded.images == ds.images);
    CHECK(loaded.texts == ds.texts);
    CHECK(loaded.true_labels == ds.true_labels);
    CHECK(loaded.poison_flags == ds.poison_flags);
}

TEST_CASE("trajectory CSV round trips exactly") {
    std::vector<EvalRecord> records;
    EvalRecord r;
    r.run_id = "MMCL:c0:lr=0.0003";
    r.epoch = 7;
    r.lr = 0.0003;
    r.loss_mode = "MMCL_SSL";
    r.accuracy = 91.3;
    r.asr = 4.7;
    r.loss.mmcl = 0.123456789123456789;
    r.loss.ssl = -1.5e-17;
    r.loss.deep_clust = 3.25;
    r.loss.l2 = 1e300;
    records.push_back(r);

    const std::string csv = to_csv(records);
    CHECK(csv.substr(0, csv.find('\n')) == kTrajectoryHeader);
    const std::vector<EvalRecord> parsed = parse_trajectory_csv(csv, "test");
    REQUIRE(parsed.size() == 1);
    CHECK(parsed[0].run_id == r.run_id);
    CHECK(parsed[0].epoch == r.epoch);
    CHECK(parsed[0].lr == r.lr);
    CHECK(parsed[0].accuracy == r.accuracy);
    CHECK(parsed[0].asr == r.asr);
    CHECK(parsed[0].loss.mmcl == r.loss.mmcl);
    CHECK(parsed[0].loss.ssl == r.loss.ssl);
    CHECK(parsed[0].loss.l2 == r.loss.l2);

    CHECK_THROWS_WITH_AS(parse_trajectory_csv("bogus\n", "test"),
                         doctest::Contains("unexpected header"), Error);
    CHECK_THROWS_AS(parse_trajectory_csv(std::string(kTrajectoryHeader) + "\na,b\n", "test"), Error);
}

TEST_CASE("number formatting ignores the process locale") {
    // to_chars is locale-independent; verify even if a grouping locale exists.
    const char* saved = std::setlocale(LC_NUMERIC, nullptr);
    std::setlocale(LC_NUMERIC, "de_DE.UTF-8"); // may fail; harmless either way
    const std::string s = format_double(1234567.25);
    CHECK(s.find(',') == std::string::npos);
    CHECK(s.find('.') != std::string::npos);
    CHECK(parse_double(s) == 1234567.25);
    std::setlocale(LC_NUMERIC, saved);
}

TEST_CASE("run config parses, applies overrides and rejects unknown keys") {
    const RunConfig cfg = parse_run_config(micro_config_json(), "micro");
    CHECK(cfg.world.num_classes == 4);
    CHECK(cfg.data.pretrain_rows == 64);
    CHECK(cfg.pretrain.objective == Objective::MMCL);
    CHECK(cfg.clean.loss_mode == LossMode::MMCL_SSL);

    const RunConfig tweaked = parse_run_config(
        micro_config_json(), "micro",
        {"clean.loss_mode=SSL_only", "pretrain.peak_lr=0.001", "world.num_classes=6"});
    CHECK(tweaked.clean.loss_mode == LossMode::SSL_only);
    CHECK(tweaked.pretrain.peak_lr == 0.001);
    CHECK(tweaked.world.num_classes == 6);

    CHECK_THROWS_WITH_AS(parse_run_config(micro_config_json(), "micro", {"clean.no_such_key=1"}),
                         doctest::Contains("unknown config key"), Error);
    CHECK_THROWS_WITH_AS(parse_run_config("{\"world\": {\"bogus\": 1}}", "micro"),
                         doctest::Contains("unknown config key"), Error);
    CHECK_THROWS_WITH_AS(parse_run_config("not json", "micro"), doctest::Contains("malformed JSON"),
                         Error);
    CHECK_THROWS_WITH_AS(parse_run_config("{\"pretrain\": {\"objective\": \"什\"}}", "micro"),
                         doctest::Contains("objective"), Error);
}

TEST_CASE("config fingerprints track content") {
    const RunConfig a = parse_run_config(micro_config_json(), "micro");
    const RunConfig b = parse_run_config(micro_config_json(), "micro");
    CHECK(config_fingerprint(a) == config_fingerprint(b));
    const RunConfig c = parse_run_config(micro_config_json(), "micro", {"pretrain.seed=10"});
    CHECK(config_fingerprint(a) != config_fingerprint(c));
}

TEST_CASE("sweep config parses axes and counts cells") {
    const std::string sweep_json = std::string("{\"base\": ") + micro_config_json() +
                                   ", \"master_seed\": 5, \"parallelism\": 2,"
                                   "\"axes\": {\"lr\": [1e-4, 3e-4, 1e-3], \"residual_poison\": [0, 2]}}";
    const SweepConfig sweep = parse_sweep_config(sweep_json, "sweep");
    CHECK(sweep.cell_count() == 6);
    CHECK(sweep.lr.size() == 3);
    CHECK(sweep.base.world.num_classes == 4);

    CHECK_THROWS_WITH_AS(parse_sweep_config("{}", "sweep"), doctest::Contains("missing section"),
                         Error);
}

TEST_CASE("derive_seed gives collision-free, master-dependent streams") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 10000; ++i) seen.insert(derive_seed(12345, i));
    CHECK(seen.size() == 10000);

    CHECK(derive_seed(1, 7) == derive_seed(1, 7));
    int changed = 0;
    for (std::uint64_t i = 0; i < 1000; ++i)
        changed += derive_seed(1, i) != derive_seed(2, i) ? 1 : 0;
    CHECK(changed == 1000);
}

#include "doctest.h"

#include "mcsp/checkpoint.hpp"
#include "mcsp/errors.hpp"
#include "mcsp/model.hpp"

#include <cstdio>
#include <fstream>

using namespace mcsp;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("/tmp/mcsp_test_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

RunConfig tiny_config() {
    RunConfig cfg = default_config();
    for (auto* enc : {&cfg.encoder_spatial, &cfg.encoder_temporal, &cfg.encoder_frequency}) {
        enc->d_model = 8;
        enc->n_heads = 2;
        enc->n_layers = 1;
        enc->d_enc = 8;
    }
    cfg.dataset.fmri_length = 16;
    cfg.dataset.eeg_unified_length = 32;
    cfg.dataset.eeg_segment_length = 16;
    cfg.dataset.frequency_length = 16;
    return cfg;
}

} // namespace

TEST_CASE("checkpoint round-trips bit-exactly") {
    TempFile f("roundtrip.ckpt");
    RunConfig cfg = tiny_config();
    cfg.seed = 99;
    McspModel model(cfg, 4);

    Rng rng(5);
    rng.normal();
    rng.uniform();

    Checkpoint out = make_checkpoint(model.params(), cfg, 1234, rng.save_state());
    save_checkpoint(f.path, out);
    Checkpoint in = load_checkpoint(f.path);

    CHECK(in.step == 1234);
    CHECK(in.seed == 99);
    CHECK(in.config_text == serialize_config(cfg));
    CHECK(in.rng_state == rng.save_state());
    REQUIRE(in.arrays.size() == out.arrays.size());
    for (std::size_t i = 0; i < in.arrays.size(); ++i) {
        CHECK(in.arrays[i].first == out.arrays[i].first);
        // Bitwise equality, not approximate.
        REQUIRE(in.arrays[i].second.rows() == out.arrays[i].second.rows());
        REQUIRE(in.arrays[i].second.cols() == out.arrays[i].second.cols());
        CHECK(std::memcmp(in.arrays[i].second.data(), out.arrays[i].second.data(),
                          sizeof(double) * std::size_t(in.arrays[i].second.size())) == 0);
    }

    // Restoring the rng state resumes the identical stream.
    Rng resumed(0);
    resumed.load_state(in.rng_state);
    Rng reference(5);
    reference.normal();
    reference.uniform();
    for (int i = 0; i < 16; ++i) CHECK(resumed.next_u64() == reference.next_u64());
}

TEST_CASE("two saves of the same state are byte-identical") {
    TempFile a("ident_a.ckpt");
    TempFile b("ident_b.ckpt");
    RunConfig cfg = tiny_config();
    McspModel model(cfg, 4);
    Checkpoint ckpt = make_checkpoint(model.params(), cfg, 7, Rng(1).save_state());
    save_checkpoint(a.path, ckpt);
    save_checkpoint(b.path, ckpt);

    std::ifstream fa(a.path, std::ios::binary);
    std::ifstream fb(b.path, std::ios::binary);
    std::string da((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::string db((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(da == db);
    CHECK(da.substr(0, 5) == "MCSP1");
}

TEST_CASE("restore pushes arrays back into a freshly built model") {
    TempFile f("restore.ckpt");
    RunConfig cfg = tiny_config();
    cfg.seed = 3;
    McspModel trained(cfg, 5);
    trained.params().get("enc.spatial.embed.w").mutable_value()(0, 0) = 42.5;
    save_checkpoint(f.path, make_checkpoint(trained.params(), cfg, 10, Rng(3).save_state()));

    Checkpoint loaded = load_checkpoint(f.path);
    RunConfig from_ckpt = parse_config_text(loaded.config_text, "ckpt");
    McspModel fresh(from_ckpt, 5);
    restore_params(loaded, fresh.params());
    CHECK(fresh.params().get("enc.spatial.embed.w").value()(0, 0) == 42.5);
    for (const auto& name : trained.params().names()) {
        CHECK(fresh.params().get(name).value() == trained.params().get(name).value());
    }

    McspModel wrong_size(from_ckpt, 6);
    CHECK_THROWS_AS(restore_params(loaded, wrong_size.params()), ValidationError);
}

TEST_CASE("corrupted files are rejected") {
    TempFile f("corrupt.ckpt");
    {
        std::ofstream out(f.path, std::ios::binary);
        out << "NOTMCSP every byte of this is wrong";
    }
    CHECK_THROWS_AS(load_checkpoint(f.path), IoError);
    CHECK_THROWS_AS(load_checkpoint("/tmp/mcsp_missing_file.ckpt"), IoError);

    RunConfig cfg = tiny_config();
    McspModel model(cfg, 4);
    save_checkpoint(f.path, make_checkpoint(model.params(), cfg, 0, Rng(0).save_state()));
    std::ifstream in(f.path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    {
        std::ofstream out(f.path, std::ios::binary);
        out.write(bytes.data(), std::streamsize(bytes.size() / 2));
    }
    CHECK_THROWS_AS(load_checkpoint(f.path), IoError);
}

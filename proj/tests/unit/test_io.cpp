#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "gplaplace/io.hpp"

using namespace gplaplace;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("gplaplace_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name, const std::string& content) const {
        const auto p = path / name;
        std::ofstream(p) << content;
        return p.string();
    }
};

std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

FieldModel small_model() {
    Eigen::MatrixXd X(8, 3);
    Eigen::VectorXd a(8), b(8);
    for (int i = 0; i < 8; ++i) {
        X.row(i) << std::cos(i), std::sin(1.7 * i), 0.3 * i;
        a[i] = -X(i, 0);
        b[i] = -X(i, 1) + 0.1 * X(i, 2);
    }
    const SEHyperparams h(1.0, Eigen::Vector3d(1.2, 0.9, 2.0), 1e-3);
    return {GPModel::condition(X, a, h, Eigen::VectorXd::Constant(8, 1e-4)), GPModel::condition(X, b, h),
            TargetKind::acceleration};
}

}  // namespace

TEST(Iso8601, Formats) {
    EXPECT_EQ(*parse_iso8601("1970-01-01T00:00:00Z"), 0.0);
    EXPECT_EQ(*parse_iso8601("1970-01-02"), 86400.0);
    EXPECT_EQ(*parse_iso8601("2000-03-01 00:00:00.000"), 951868800.0);
    EXPECT_EQ(*parse_iso8601("2009-08-01 06:55:26.500"), 1249109726.5);
    EXPECT_EQ(*parse_iso8601("2009-08-01T08:55:26+02:00"), 1249109726.0);
    EXPECT_EQ(*parse_iso8601("2009-08-01T01:55:26-0500"), 1249109726.0);
    EXPECT_EQ(*parse_iso8601("2024-02-29T12:00"), 1709208000.0);
    for (const char* bad : {"", "2009-13-01", "2009-02-30", "2023-02-29", "2009-08-01T25:00", "yesterday",
                            "2009-08-01T06:55:26Zjunk", "2009/08/01"})
        EXPECT_FALSE(parse_iso8601(bad)) << bad;
}

TEST(Csv, QuotedFields) {
    const auto f = detail::split_csv(R"(a,"b, c","say ""hi""", d ,)");
    ASSERT_EQ(f.size(), 5u);
    EXPECT_EQ(f[1], "b, c");
    EXPECT_EQ(f[2], "say \"hi\"");
    EXPECT_EQ(f[3], "d");
    EXPECT_EQ(f[4], "");
}

TEST(Movebank, SingleBird) {
    TempDir d;
    const auto p = d.file("one.csv",
                          "timestamp,location-long,location-lat,individual-local-identifier\n"
                          "2009-08-01 06:00:00.000,10.0,43.0,b1\n"
                          "2009-08-01 07:30:00.000,10.1,43.0,b1\n"
                          "2009-08-01 09:00:00.000,10.2,43.1,b1\n");
    const auto s = load_trajectories_csv(p);
    ASSERT_EQ(s.trajectories.size(), 1u);
    const auto& t = s.trajectories[0];
    EXPECT_EQ(t.agent_id, "b1");
    EXPECT_EQ(t.times, Eigen::Vector3d(0.0, 1.5, 3.0));
    EXPECT_NO_THROW(t.validate());
    ASSERT_TRUE(s.projection);
    EXPECT_NEAR(s.projection->lon0_deg, 10.1, 1e-12);
}

TEST(Movebank, ProjectionOneDegreeEast) {
    // Three points symmetric in longitude about 0 at latitude 43: the east point lands 1 degree east of the centroid.
    TempDir d;
    const auto p = d.file("proj.csv",
                          "Individual_Local_Identifier,Location_Lat,Location_Long,Timestamp\n"
                          "b,43,-1,2009-08-01T00:00:00Z\n"
                          "b,43,0,2009-08-01T01:00:00Z\n"
                          "b,43,1,2009-08-01T02:00:00Z\n");
    const auto s = load_trajectories_csv(p);
    ASSERT_EQ(s.trajectories.size(), 1u);
    const double want = 6371.0 * std::numbers::pi / 180.0 * std::cos(43.0 * std::numbers::pi / 180.0);
    EXPECT_NEAR(s.trajectories[0].positions(2, 0), want, 1e-9);
    EXPECT_NEAR(s.trajectories[0].positions(2, 0), 81.3, 0.05);
    EXPECT_NEAR(s.trajectories[0].positions(2, 1), 0.0, 1e-12);
}

TEST(Movebank, InterleavedBirdsShareTimeOrigin) {
    TempDir d;
    const auto p = d.file("two.csv",
                          "individual-local-identifier,timestamp,location-long,location-lat\n"
                          "a,2009-08-01 02:00:00,0,0\n"
                          "b,2009-08-01 01:00:00,0,0.1\n"
                          "a,2009-08-01 03:00:00,0,0.2\n"
                          "b,2009-08-01 04:00:00,0.1,0\n"
                          "a,2009-08-01 05:00:00,0.1,0.2\n"
                          "b,2009-08-01 06:00:00,0.2,0.1\n");
    const auto s = load_trajectories_csv(p);
    ASSERT_EQ(s.trajectories.size(), 2u);
    EXPECT_EQ(s.trajectories[0].agent_id, "a");
    EXPECT_EQ(s.trajectories[0].times, Eigen::Vector3d(1, 2, 4));
    EXPECT_EQ(s.trajectories[1].times, Eigen::Vector3d(0, 3, 5));
}

TEST(Movebank, DuplicatesShortAgentsAndBadRows) {
    TempDir d;
    const auto p = d.file("messy.csv",
                          "individual-local-identifier,timestamp,location-long,location-lat\n"
                          "a,2009-08-01 03:00:00,0.5,0\n"
                          "a,2009-08-01 01:00:00,0,0\n"
                          "a,2009-08-01 01:00:00,9,9\n"
                          "a,not-a-time,0,0\n"
                          "a,2009-08-01 02:00:00,abc,0\n"
                          "a,2009-08-01 02:00:00,0.2,0.1\n"
                          "short,2009-08-01 02:00:00,0.2,0.1\n"
                          "short,2009-08-01 03:00:00,0.3,0.1\n");
    const auto s = load_trajectories_csv(p);
    ASSERT_EQ(s.trajectories.size(), 1u);
    const auto& a = s.trajectories[0];
    EXPECT_EQ(a.size(), 3);
    EXPECT_EQ(a.times, Eigen::Vector3d(0, 1, 2));
    bool line5 = false, line6 = false, short_warned = false, dup_warned = false;
    for (const auto& w : s.warnings) {
        line5 = line5 || w.line == 5;
        line6 = line6 || w.line == 6;
        short_warned = short_warned || w.message.find("'short' skipped") != std::string::npos;
        dup_warned = dup_warned || w.message.find("duplicate") != std::string::npos;
    }
    EXPECT_TRUE(line5 && line6 && short_warned && dup_warned);
    // The kept duplicate is the first one in file order (0, 0), not (9, 9).
    const auto again = load_trajectories_csv(p);
    EXPECT_EQ(again.trajectories[0].positions, a.positions);
    EXPECT_LT(std::abs(a.positions(0, 0)), 50.0);
}

TEST(Movebank, MissingColumnNamed) {
    TempDir d;
    const auto p = d.file("nolat.csv", "individual-local-identifier,timestamp,location-long\na,2009-08-01,0\n");
    try {
        (void)load_trajectories_csv(p);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("location-lat"), std::string::npos);
        EXPECT_EQ(e.file(), p);
    }
    EXPECT_THROW((void)load_trajectories_csv((d.path / "absent.csv").string()), IoError);
}

TEST(Movebank, Fixture) {
    const auto s = load_trajectories_csv(std::string(GPLAPLACE_TEST_DATA) + "/movebank_fixture.csv");
    ASSERT_EQ(s.trajectories.size(), 2u);
    EXPECT_EQ(s.trajectories[0].size() + s.trajectories[1].size(), 50);
    EXPECT_TRUE(s.warnings.empty());
    for (const auto& t : s.trajectories) EXPECT_NO_THROW(t.validate());
}

TEST(Planar, RoundTrip) {
    TempDir d;
    std::vector<Trajectory> trajs{{"p", Eigen::Vector3d(0, 0.1, 0.25), Eigen::MatrixXd::Random(3, 2)},
                                  {"q", Eigen::Vector4d(1, 2, 3, 4), Eigen::MatrixXd::Random(4, 2)}};
    const auto p = (d.path / "t.csv").string();
    write_planar_csv(p, trajs);
    const auto s = load_any_trajectories(p);
    EXPECT_FALSE(s.projection);
    ASSERT_EQ(s.trajectories.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_EQ(s.trajectories[i].agent_id, trajs[i].agent_id);
        EXPECT_EQ(s.trajectories[i].times, trajs[i].times);
        EXPECT_EQ(s.trajectories[i].positions, trajs[i].positions);
    }
}

TEST(GridExport, TwoByTwoRoundTrip) {
    TempDir d;
    const auto fm = small_model();
    const auto r = eval_grid(fm, GridSpec{-1, 1, 2, -0.5, 0.5, 2, {0.7}});
    const auto files = export_grid(r, fm, d.path.string());
    ASSERT_EQ(files.size(), 2u);
    const auto text = slurp((d.path / "grid_t0.csv").string());
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);
    EXPECT_EQ(text.substr(0, text.find('\n')), kGridHeader);
    EXPECT_EQ(parse_grid_csv((d.path / "grid_t0.csv").string()), grid_rows(r, 0));
    const auto m = nlohmann::json::parse(slurp((d.path / "manifest.json").string()));
    EXPECT_EQ(m["kl"]["variant"], "paper");
    EXPECT_EQ(m["grid"]["nx"], 2);
    EXPECT_EQ(m["hyperparameters"]["vx"]["length_scales"].size(), 3u);
}

TEST(GridExport, RoundTripAndDeterminism) {
    TempDir d;
    const auto fm = small_model();
    const auto r = eval_grid(fm, GridSpec{-1.3, 1.1, 7, -0.9, 1.4, 5, {0.0, 0.5, 2.1}});
    (void)export_grid(r, fm, (d.path / "a").string());
    (void)export_grid(eval_grid(fm, r.spec), fm, (d.path / "b").string());
    for (std::size_t k = 0; k < 3; ++k) {
        const auto pa = (d.path / "a" / grid_file_name(k)).string();
        EXPECT_EQ(parse_grid_csv(pa), grid_rows(r, k));
        EXPECT_EQ(slurp(pa), slurp((d.path / "b" / grid_file_name(k)).string()));
    }
    EXPECT_EQ(slurp((d.path / "a/manifest.json").string()), slurp((d.path / "b/manifest.json").string()));
}

TEST(GridExport, ErrorsNameTheProblem) {
    TempDir d;
    const auto fm = small_model();
    const auto r = eval_grid(fm, GridSpec{0, 1, 2, 0, 1, 2, {0.0}});
    const auto blocker = d.file("blocker", "x");
    EXPECT_THROW((void)export_grid(r, fm, blocker + "/sub"), IoError);
    const auto bad = d.file("bad.csv", std::string(kGridHeader) + "\n1,2,3\n");
    try {
        (void)parse_grid_csv(bad);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.line(), 2);
    }
    EXPECT_THROW((void)parse_grid_csv(d.file("hdr.csv", "x,y\n")), FormatError);
}

TEST(ModelFile, ReloadPredictsIdentically) {
    TempDir d;
    auto fm = small_model();
    const auto p = (d.path / "m.json").string();
    save_field_model(p, fm);
    const auto back = load_field_model(p);
    const Eigen::MatrixXd Q = Eigen::MatrixXd::Random(20, 3);
    const auto a = eval_divergence_mean(fm, Q), b = eval_divergence_mean(back, Q);
    EXPECT_EQ(a, b);
    EXPECT_EQ(back.model_vx.hyper().length_scales, fm.model_vx.hyper().length_scales);
    EXPECT_EQ(back.model_vx.noise_extra(), fm.model_vx.noise_extra());

    // Sparse models keep their inducing inputs.
    const auto& X = fm.model_vx.training_inputs();
    FieldModel sp{GPModel::condition_sparse(X, fm.model_vx.raw_targets(), X.topRows(4), fm.model_vx.hyper()),
                  GPModel::condition_sparse(X, fm.model_vy.raw_targets(), X.topRows(4), fm.model_vy.hyper()),
                  TargetKind::velocity};
    save_field_model(p, sp);
    const auto sb = load_field_model(p);
    EXPECT_EQ(sb.model_vy.mode(), GPMode::sparse);
    EXPECT_EQ(sb.target_kind, TargetKind::velocity);
    EXPECT_EQ(eval_divergence_mean(sp, Q), eval_divergence_mean(sb, Q));

    EXPECT_THROW((void)load_field_model(d.file("junk.json", "{\"format\": 3}")), FormatError);
    EXPECT_THROW((void)load_field_model(d.file("broken.json", "{")), FormatError);
}

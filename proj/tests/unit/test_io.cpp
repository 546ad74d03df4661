#include "fixtures.hpp"

#include <doctest.h>

#include <filesystem>

using namespace eitias;
using namespace eitias::test;
namespace fs = std::filesystem;

TEST_SUITE("io") {
  TEST_CASE("atomic write replaces the target and leaves no temporaries") {
    const fs::path dir = fs::temp_directory_path() / "eitias_io_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path target = dir / "out.txt";
    write_file_atomic(target, "first");
    write_file_atomic(target, "second");
    CHECK(read_file(target) == "second");
    int entries = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++entries;
    CHECK(entries == 1);
    write_file_atomic(dir / "nested" / "x.txt", "y");
    CHECK(read_file(dir / "nested" / "x.txt") == "y");
    CHECK_THROWS_AS(write_file_atomic(target / "below_a_file.txt", "y"), InputError);
    fs::remove_all(dir);
  }

  TEST_CASE("vectors and matrices round trip through JSON") {
    const Vector v = uniform_vector(17, 1);
    CHECK(vector_from_json(Json::parse(to_json(v).dump())) == v);
    const Matrix m = Matrix::Random(3, 5);
    const Matrix back = matrix_from_json(Json::parse(to_json(m).dump()));
    CHECK(back == m);
    CHECK_THROWS(matrix_from_json(Json::parse("[[1,2],[3]]")));
  }

  TEST_CASE("run configuration round trips") {
    RunConfig c;
    c.mesh.target = 1234;
    c.mesh.refine_inside = 1;
    c.seed = 42;
    c.noise_percent = 0.5;
    c.hypermodel.r = -0.5;
    c.hypermodel.eta = -1.0;
    c.ias.backend = Backend::LanczosBasis;
    c.phantom = PhantomSpec::two_inclusions();
    const RunConfig back = run_config_from_json(Json::parse(run_config_to_json(c).dump()));
    CHECK(back.mesh.target == 1234);
    CHECK(back.mesh.refine_inside == 1);
    CHECK(back.seed == 42);
    CHECK(back.noise_percent == 0.5);
    CHECK(back.hypermodel.r == -0.5);
    CHECK(back.ias.backend == Backend::LanczosBasis);
    CHECK(back.phantom.inclusions.size() == 2);
    Json bad = run_config_to_json(c);
    bad["mesh_generation"]["fill"] = 1.5;
    CHECK_THROWS_AS(run_config_from_json(bad), InputError);
  }
}

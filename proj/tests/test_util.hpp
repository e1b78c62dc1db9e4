#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "loopcert/ir.hpp"

namespace loopcert::test {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path);
    REQUIRE_MESSAGE(in.good(), ("cannot open " + path).c_str());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline SystemSpec load_benchmark() {
    return parse_spec(read_file(std::string(LOOPCERT_DATA_DIR) + "/benchmark.sys"));
}

// Table 1 constants, assembled by hand as an independent route.
struct Benchmark {
    Matrix ac{{0.4990, -0.0500}, {0.0100, 1.0000}};
    Matrix bc{{1.0}, {0.0}};
    Matrix cc{{564.48, 0.0}};
    double dc = -1280.0;
    Matrix ap{{1.0000, 0.0100}, {-0.0100, 1.0000}};
    Matrix bp{{0.00005}, {0.01}};
    Matrix cp{{1.0, 0.0}};
    SymMatrix p{{0.2205, 0.0188, -0.0750, 0.0177},
                {0.0188, 0.4736, 0.0535, 0.0015},
                {-0.0750, 0.0535, 0.1012, -0.0049},
                {0.0177, 0.0015, -0.0049, 0.0015}};
    SymMatrix q{{0.1012, -0.0049}, {-0.0049, 0.0015}};
    double lambda = 0.0614;

    Matrix closed_a() const {
        Matrix a(4, 4);
        a.set_block(0, 0, ac);
        a.set_block(2, 0, bp * cc);
        a.set_block(2, 2, ap);
        return a;
    }
    Matrix closed_b() const {
        Matrix b(4, 1);
        b.set_block(0, 0, bc);
        b.set_block(2, 0, bp.scaled(dc));
        return b;
    }
    Matrix closed_c() const {
        Matrix c(1, 4);
        c.set_block(0, 2, cp);
        return c;
    }
};

}  // namespace loopcert::test

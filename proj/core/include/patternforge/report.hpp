#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace patternforge {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One run request, parseable from a JSON config file or CLI flags.
struct RunConfig {
    std::string task; // verify | slab-spectrum | slab-branch | lamellae | lattice
    double kappa = 1.0;
    double gamma = 0.0;
    double gamma_frac = 0.0; // when > 0: gamma = gamma_frac * gamma_N (lattice)
    std::vector<double> s_grid;
    std::vector<double> eps_grid;
    double s_value = 0.05;
    int n_dim = 2;
    int m_dim = 1;
    std::vector<std::array<double, 3>> basis; // lattice basis rows
    int ell_max = 16;
    int k_max = 32;
    int kband = 12;
    int samples = 20;
    unsigned long seed = 2026;
    int n_target = 64;
    int n_quad = 128;
    int threads = 0; // 0 = environment / hardware
    std::string out_dir = ".";
    bool force = false;
    bool dump_shapes = false;

    void validate() const;            // throws ConfigError
    std::string file_prefix() const;  // task_kappaX_gammaY
};

RunConfig config_from_json_text(const std::string& text); // throws ConfigError
std::string config_to_json_text(const RunConfig& c);

// "a:b:c" -> {a, a+c, ..., b} (inclusive within rounding); or "x,y,z"
std::vector<double> parse_grid(const std::string& text);

// formats a double with 17 significant digits
std::string num17(double v);

class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header,
              bool force);
    void row(const std::vector<double>& values);
    void row_mixed(const std::vector<std::string>& cells);
    ~CsvWriter();

  private:
    struct Impl;
    Impl* impl_;
};

// writes text to path, refusing to overwrite unless force
void write_file(const std::string& path, const std::string& text, bool force);

} // namespace patternforge

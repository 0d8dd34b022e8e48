#include "cvfl/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

namespace cvfl {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

File open_for_write(const std::string& path, const char* mode = "w") {
    File f(std::fopen(path.c_str(), mode));
    if (!f) throw Error(ErrorCode::configuration, "cannot write " + path);
    return f;
}

void write_header(std::FILE* f, const std::vector<std::string>& header) {
    for (std::size_t i = 0; i < header.size(); ++i)
        std::fprintf(f, i ? ",%s" : "%s", header[i].c_str());
    std::fputc('\n', f);
}

}  // namespace

void write_columns(const std::string& path, const std::vector<std::string>& header,
                   const std::vector<const std::vector<double>*>& columns) {
    if (columns.size() != header.size()) {
        throw Error(ErrorCode::shape, "header and column count differ");
    }
    const std::size_t n = columns.empty() ? 0 : columns[0]->size();
    for (const auto* c : columns)
        if (c->size() != n) throw Error(ErrorCode::shape, "columns differ in length");
    auto f = open_for_write(path);
    write_header(f.get(), header);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < columns.size(); ++c)
            std::fprintf(f.get(), c ? ",%.17g" : "%.17g", (*columns[c])[r]);
        std::fputc('\n', f.get());
    }
}

void write_mean_path(const std::string& path, const SampledPath<2>& p) {
    std::vector<double> x(p.size()), mp(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        x[i] = p.y[i][0];
        mp[i] = p.y[i][1];
    }
    write_columns(path, {"t", "x", "p"}, {&p.t, &x, &mp});
}

void write_covariance_path(const std::string& path, const SampledPath<3>& p) {
    std::vector<double> vx(p.size()), vp(p.size()), c(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        vx[i] = p.y[i][0];
        vp[i] = p.y[i][1];
        c[i] = p.y[i][2];
    }
    write_columns(path, {"t", "vx", "vp", "c"}, {&p.t, &vx, &vp, &c});
}

void write_trajectory(const std::string& path, const TrajectoryRecord& r) {
    std::vector<double> dI = r.dI;
    if (dI.empty()) dI.assign(r.t.size(), std::nan(""));
    write_columns(path, {"t", "xc", "pc", "dI"}, {&r.t, &r.x, &r.p, &dI});
}

void write_ensemble(const std::string& path, const EnsembleStats& s) {
    write_columns(path, {"t", "mean_x", "sem_x", "mean_p", "sem_p", "var_x", "var_p"},
                  {&s.t, &s.mean_x, &s.sem_x, &s.mean_p, &s.sem_p, &s.var_x, &s.var_p});
}

void write_field(const std::string& path, const GridField& field) {
    auto f = open_for_write(path);
    write_header(f.get(), {"x", "p", "w"});
    for (std::size_t i = 0; i < field.spec.nx; ++i)
        for (std::size_t j = 0; j < field.spec.np; ++j)
            std::fprintf(f.get(), "%.17g,%.17g,%.17g\n", field.spec.x(i), field.spec.p(j),
                         field.at(i, j));
}

void write_chart(const std::string& path, const std::vector<ChartCell>& cells) {
    auto f = open_for_write(path);
    write_header(f.get(), {"k", "tau", "re_lambda", "classification"});
    for (const auto& c : cells)
        std::fprintf(f.get(), "%.17g,%.17g,%.17g,%s\n", c.k, c.tau, c.re_lambda,
                     to_string(c.simulated));
}

void write_field_binary(const std::string& path, const GridField& field, double t) {
    {
        auto f = open_for_write(path, "wb");
        const auto written =
            std::fwrite(field.w.data(), sizeof(double), field.w.size(), f.get());
        if (written != field.w.size()) throw Error(ErrorCode::configuration, "short write " + path);
    }
    nlohmann::json h;
    h["layout"] = "x-major float64, w[i * np + j]";
    h["nx"] = field.spec.nx;
    h["np"] = field.spec.np;
    h["x_min"] = field.spec.x_min;
    h["x_max"] = field.spec.x_max;
    h["p_min"] = field.spec.p_min;
    h["p_max"] = field.spec.p_max;
    h["hx"] = field.spec.hx();
    h["hp"] = field.spec.hp();
    h["t"] = t;
    write_json(path + ".json", h);
}

void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::configuration, "cannot write " + path);
    out << j.dump(2) << '\n';
}

nlohmann::json json_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

}  // namespace cvfl

#pragma once

// Field snapshot text format:
//   # grid uniform N=<cells> Rmax=<x>
//   # time <t>
//   # form <u|psi>
//   followed by N+1 lines "r value velocity".
// Numbers are written in shortest round-trip form, so read(write(s)) == s.

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "critwave/radial_field.hpp"

namespace critwave {

inline std::string format_double(double x)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

inline void write_snapshot(std::ostream& os, const RadialState& s)
{
    const auto& g = *s.grid();
    os << "# grid uniform N=" << g.cells() << " Rmax=" << format_double(g.r_max()) << '\n';
    os << "# time " << format_double(s.time) << '\n';
    os << "# form " << to_string(s.form()) << '\n';
    for (std::size_t i = 0; i < g.size(); ++i)
        os << format_double(g[i]) << ' ' << format_double(s.position[i]) << ' '
           << format_double(s.velocity[i]) << '\n';
}

inline void write_snapshot(const std::string& path, const RadialState& s)
{
    std::ofstream os(path);
    if (!os)
        throw Error("cannot open " + path + " for writing");
    write_snapshot(os, s);
}

inline RadialState read_snapshot(std::istream& is)
{
    std::string line;
    std::size_t cells = 0;
    double r_max = 0.0, t = 0.0;
    Form form = Form::u;
    bool have_grid = false, have_time = false, have_form = false;
    while (is.peek() == '#' && std::getline(is, line)) {
        std::istringstream ls(line.substr(1));
        std::string key;
        ls >> key;
        if (key == "grid") {
            std::string kind, n_tok, r_tok;
            ls >> kind >> n_tok >> r_tok;
            if (kind != "uniform" || n_tok.rfind("N=", 0) != 0 || r_tok.rfind("Rmax=", 0) != 0)
                throw Error("malformed grid header: " + line);
            cells = std::stoul(n_tok.substr(2));
            r_max = std::stod(r_tok.substr(5));
            have_grid = true;
        } else if (key == "time") {
            ls >> t;
            have_time = true;
        } else if (key == "form") {
            std::string f;
            ls >> f;
            if (f == "u")
                form = Form::u;
            else if (f == "psi")
                form = Form::psi;
            else
                throw Error("unknown form '" + f + "'");
            have_form = true;
        }
    }
    if (!have_grid || !have_time || !have_form)
        throw Error("snapshot is missing a grid, time or form header");
    auto grid = std::make_shared<const RadialGrid>(cells, r_max);
    std::vector<double> pos(grid->size()), vel(grid->size());
    for (std::size_t i = 0; i < grid->size(); ++i) {
        double r = 0.0;
        if (!(is >> r >> pos[i] >> vel[i]))
            throw Error("snapshot ended after " + std::to_string(i) + " of " +
                        std::to_string(grid->size()) + " rows");
    }
    return RadialState(RadialField(grid, std::move(pos), form), RadialField(grid, std::move(vel), form), t);
}

inline RadialState read_snapshot(const std::string& path)
{
    std::ifstream is(path);
    if (!is)
        throw Error("cannot open " + path);
    return read_snapshot(is);
}

} // namespace critwave

#pragma once

#include <charconv>
#include <cmath>
#include <ostream>
#include <string>

#include "kronecker/analysis/survey.hpp"
#include "kronecker/integrators.hpp"

namespace kronecker::io {

/// Shortest text that reads back to the same double.
inline std::string number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, end);
}

/// Header "t,<slot labels>", one row per stored point.
inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
    out << "t";
    for (const auto& l : traj.layout->labels()) out << ',' << l;
    out << '\n';
    for (std::size_t k = 0; k < traj.size(); ++k) {
        out << number(traj.times[k]);
        for (double v : traj.points[k].coords()) out << ',' << number(v);
        out << '\n';
    }
}

inline void write_survey_csv(std::ostream& out, const SurveyReport& report) {
    out << "index,seed,skipped,escaped,offset_norm,gain,gap,candidate\n";
    for (const auto& r : report.rows) {
        out << r.index << ',' << r.seed << ',' << (r.skipped ? 1 : 0) << ',' << (r.escaped ? 1 : 0) << ','
            << number(r.real_norm) << ',' << number(r.gain) << ',' << number(r.gap) << ',' << (r.candidate ? 1 : 0)
            << '\n';
    }
}

}  // namespace kronecker::io

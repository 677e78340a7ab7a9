#include <string>

#include "loadid/grid.hpp"

namespace loadid::grid {

// Mirrors data/wscc9_motor.case.
const std::string& bundled_case_text() {
    static const std::string text = R"CASE(# 3-machine 9-bus system (WSCC / Anderson-Fouad data), 100 MVA base.
# Bus 6 carries an induction motor; its scheduled P/Q equal the motor's
# steady-state absorption at the operating slip, with a shunt capacitor
# supplying part of the motor's reactive demand.

[system]
frequency 60

[bus]
# id type v_set p_gen [b_shunt]
1 slack 1.040 0.00
2 pv    1.025 1.63
3 pv    1.025 0.85
4 pq    1.000 0.00
5 pq    1.000 0.00
6 pq    1.000 0.00 0.20
7 pq    1.000 0.00
8 pq    1.000 0.00
9 pq    1.000 0.00

[branch]
# from to r x b_total
1 4 0.0000 0.0576 0.000
4 5 0.0100 0.0850 0.176
5 7 0.0320 0.1610 0.306
4 6 0.0170 0.0920 0.158
6 9 0.0390 0.1700 0.358
7 8 0.0085 0.0720 0.149
8 9 0.0119 0.1008 0.209
2 7 0.0000 0.0625 0.000
3 9 0.0000 0.0586 0.000

[gen]
# bus tj(=2H) xdp damping
1 47.28 0.0608 2.0
2 12.80 0.1198 2.0
3  6.02 0.1813 2.0

[load]
# bus p q kind
5 1.25 0.50 impedance
8 1.00 0.35 impedance
6 0.66070804231776 0.42501008554199 motor
)CASE";
    return text;
}

NetworkCase bundled_case() { return load_case(bundled_case_text()); }

}  // namespace loadid::grid

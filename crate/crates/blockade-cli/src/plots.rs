//! Gnuplot script generation for the four standard views of the emitted
//! data. Scripts reference data files by relative path and contain no
//! volatile content, so regeneration is byte-identical.

use std::fs;
use std::io::Write;
use std::path::Path;

pub struct PlotScript {
    pub file_name: &'static str,
    pub needs: &'static [&'static str],
    pub body: &'static str,
}

pub const SCRIPTS: [PlotScript; 5] = [
    PlotScript {
        file_name: "drive_comparison.gp",
        needs: &[
            "weak_combined.csv",
            "weak_continuous.csv",
            "weak_pulses_only.csv",
        ],
        body: r#"# Equal-time correlation under combined, continuous and pulsed-only drives.
set datafile separator ","
set terminal pngcairo size 1000,900
set output "drive_comparison.png"
set multiplot layout 3,2 rowsfirst
set xlabel "t [1/γ]"
set key off
set ylabel "P(t)"
plot "weak_combined.csv" using 1:7 with lines lc rgb "black", \
     "weak_combined.csv" using ($8 == 1 ? $1 : 1/0):(0):(0):(1) with vectors nohead lc rgb "red"
set ylabel "g2(t,t)"
set yrange [0:2]
plot "weak_combined.csv" using 1:5 with lines lc rgb "red"
set yrange [*:*]
set ylabel "P(t)"
plot "weak_continuous.csv" using 1:7 with lines lc rgb "black"
set ylabel "g2(t,t)"
set yrange [0:2]
plot "weak_continuous.csv" using 1:5 with lines lc rgb "blue"
set yrange [*:*]
set ylabel "P(t)"
plot "weak_pulses_only.csv" using 1:7 with lines lc rgb "black", \
     "weak_pulses_only.csv" using ($8 == 1 ? $1 : 1/0):(0):(0):(1) with vectors nohead lc rgb "red"
set ylabel "g2(t,t)"
set yrange [0:2]
plot "weak_pulses_only.csv" using 1:5 with lines lc rgb "dark-green"
unset multiplot
"#,
    },
    PlotScript {
        file_name: "weak_sweep.gp",
        needs: &["weak_sweep.csv"],
        body: r#"# Correlation minimum versus occupation in the weakly nonlinear regime.
set datafile separator ","
set terminal pngcairo size 700,500
set output "weak_sweep.png"
set logscale x
set xlabel "n(t_s)"
set ylabel "g2"
set key top left
plot "weak_sweep.csv" using 4:5 with points pt 7 lc rgb "red" title "combined drive, g2(t_s,t_s)", \
     "weak_sweep.csv" using 7:6 with linespoints pt 6 lc rgb "blue" title "continuous drive, g0"
"#,
    },
    PlotScript {
        file_name: "regime_map.gp",
        needs: &["regime_map.csv"],
        body: r#"# Correlation minima over occupation and nonlinearity, combined versus continuous.
set datafile separator ","
set terminal pngcairo size 1100,500
set output "regime_map.png"
set multiplot layout 1,2 rowsfirst
set logscale xy
set xlabel "n"
set ylabel "kerr strength [γ]"
set cbrange [0:1.2]
set view map
set title "combined drive: g2(t_s,t_s)"
splot "regime_map.csv" using 4:1:5 with points pt 5 ps 1.6 palette notitle
set title "continuous drive: g0"
splot "regime_map.csv" using 7:1:6 with points pt 5 ps 1.6 palette notitle
unset multiplot
"#,
    },
    PlotScript {
        file_name: "strong_trace.gp",
        needs: &["strong_combined.csv", "strong_continuous.csv"],
        body: r#"# Strong-nonlinearity time traces: combined drive versus the conventional level.
set datafile separator ","
set terminal pngcairo size 1000,450
set output "strong_trace.png"
set multiplot layout 1,2 rowsfirst
set xlabel "t [1/γ]"
set ylabel "g2(t,t)"
set key off
plot "strong_combined.csv" using 1:5 with lines lc rgb "red", \
     "strong_continuous.csv" using 1:5 with lines dt 2 lc rgb "blue"
set ylabel "n(t)"
plot "strong_combined.csv" using 1:2 with lines lc rgb "red", \
     "strong_continuous.csv" using 1:2 with lines dt 2 lc rgb "blue"
unset multiplot
"#,
    },
    PlotScript {
        file_name: "two_time.gp",
        needs: &["two_time_weak.csv", "two_time_strong.csv"],
        body: r#"# Two-time correlation around the reference time, both nonlinearity regimes.
set datafile separator ","
set terminal pngcairo size 1000,450
set output "two_time.png"
set multiplot layout 1,2 rowsfirst
set xlabel "t - t_s [1/γ]"
set ylabel "g2(t, t_s)"
set key bottom right
set title "weak nonlinearity"
plot "two_time_weak.csv" using 2:3 with lines lc rgb "red" title "combined", \
     "two_time_weak.csv" using 2:4 with lines dt 2 lc rgb "blue" title "continuous"
set title "strong nonlinearity"
plot "two_time_strong.csv" using 2:3 with lines lc rgb "red" title "combined", \
     "two_time_strong.csv" using 2:4 with lines dt 2 lc rgb "blue" title "continuous"
unset multiplot
"#,
    },
];

/// Write every script into `dir`. Returns the list of data files that the
/// scripts expect but are missing (callers treat non-empty as an error).
pub fn write_scripts(dir: &Path) -> std::io::Result<Vec<String>> {
    let mut missing = Vec::new();
    for script in &SCRIPTS {
        for need in script.needs {
            if !dir.join(need).is_file() {
                missing.push(need.to_string());
            }
        }
    }
    if !missing.is_empty() {
        return Ok(missing);
    }
    for script in &SCRIPTS {
        let mut f = fs::File::create(dir.join(script.file_name))?;
        f.write_all(script.body.as_bytes())?;
    }
    Ok(Vec::new())
}

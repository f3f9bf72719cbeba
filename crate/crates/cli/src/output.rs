//! CSV emission and the SVG line chart.

use std::io::Write;

use cart_core::simulate::{OutcomeReport, Trajectory};

use crate::error::{CliError, CliResult};

pub const TRAJECTORY_HEADER: [&str; 7] = ["t", "x1", "x2", "x3", "tau", "V", "z2"];

pub const SWEEP_HEADER: [&str; 7] = [
    "cell_index",
    "varied_value",
    "clearance_time",
    "relapse_time",
    "diverged",
    "nadir_t",
    "nadir_x1",
];

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Write {
        path: "<csv>".into(),
        source: std::io::Error::other(e.to_string()),
    }
}

/// Write a trajectory; `V` and `z2` cells stay empty when `certified` is false.
pub fn write_trajectory<W: Write>(w: W, traj: &Trajectory, certified: bool) -> CliResult<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRAJECTORY_HEADER).map_err(csv_err)?;
    for s in &traj.samples {
        let (v, z2) = if certified { (s.v, s.z2) } else { (None, None) };
        out.write_record([
            fmt_f64(s.t),
            fmt_f64(s.state.x1),
            fmt_f64(s.state.x2),
            fmt_f64(s.state.x3),
            fmt_f64(s.tau),
            fmt_opt(v),
            fmt_opt(z2),
        ])
        .map_err(csv_err)?;
    }
    out.flush().map_err(|source| CliError::Write {
        path: "<csv>".into(),
        source,
    })
}

pub struct SweepRow {
    pub cell_index: usize,
    pub varied_value: f64,
    pub outcome: OutcomeReport,
}

pub fn write_sweep<W: Write>(w: W, rows: &[SweepRow]) -> CliResult<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SWEEP_HEADER).map_err(csv_err)?;
    for r in rows {
        let o = &r.outcome;
        out.write_record([
            r.cell_index.to_string(),
            fmt_f64(r.varied_value),
            fmt_opt(o.clearance_time),
            fmt_opt(o.relapse_time),
            o.diverged.to_string(),
            fmt_f64(o.nadir.0),
            fmt_f64(o.nadir.1),
        ])
        .map_err(csv_err)?;
    }
    out.flush().map_err(|source| CliError::Write {
        path: "<csv>".into(),
        source,
    })
}

/// Key-value summary printed by `simulate`.
pub fn outcome_lines(o: &OutcomeReport) -> String {
    let opt = |v: Option<f64>| v.map_or("none".to_string(), |t| t.to_string());
    format!(
        "clearance_time={}\nrelapse_time={}\ndiverged={}\nnadir_t={}\nnadir_x1={:e}\ncar_t_growing={}\n",
        opt(o.clearance_time),
        opt(o.relapse_time),
        o.diverged,
        o.nadir.0,
        o.nadir.1,
        o.car_t_growing
    )
}

/// Columns of a trajectory CSV needed for plotting.
#[derive(Debug, Default)]
pub struct Series {
    pub t: Vec<f64>,
    pub x: [Vec<f64>; 3],
}

pub fn read_series(text: &str) -> CliResult<Series> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Validation(format!("csv: {e}")))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Validation(format!("csv: missing column `{name}`")))
    };
    let idx = [col("t")?, col("x1")?, col("x2")?, col("x3")?];
    let mut series = Series::default();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Validation(format!("csv: {e}")))?;
        let mut vals = [0.0; 4];
        for (v, &i) in vals.iter_mut().zip(&idx) {
            let cell = rec.get(i).unwrap_or("");
            *v = cell.parse().map_err(|_| {
                CliError::Validation(format!("csv row {}: `{}` is not a number", line + 2, headers[i].to_owned()))
            })?;
        }
        series.t.push(vals[0]);
        for k in 0..3 {
            series.x[k].push(vals[k + 1]);
        }
    }
    if series.t.is_empty() {
        return Err(CliError::Validation("csv: no rows".into()));
    }
    Ok(series)
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 30.0, 50.0); // left, right, top, bottom
const COLORS: [&str; 3] = ["#d62728", "#1f77b4", "#2ca02c"];
const LABELS: [&str; 3] = ["x1 tumor", "x2 active", "x3 non-active"];

fn nice_ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if hi <= lo {
        return vec![lo];
    }
    let raw = (hi - lo) / n as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let mut ticks = Vec::new();
    let mut v = (lo / step).ceil() * step;
    while v <= hi + 1e-9 * step {
        ticks.push(v);
        v += step;
    }
    ticks
}

/// Static line chart of the three populations against time.
///
/// With `log`, values are drawn on a base-10 axis and anything at or below
/// `1e-12` of the largest value is pinned to that floor.
pub fn render_svg(series: &Series, log: bool) -> String {
    let (ml, mr, mt, mb) = MARGIN;
    let (pw, ph) = (WIDTH - ml - mr, HEIGHT - mt - mb);
    let t0 = series.t[0];
    let t1 = *series.t.last().unwrap();
    let tspan = if t1 > t0 { t1 - t0 } else { 1.0 };

    let finite = series.x.iter().flatten().copied().filter(|v| v.is_finite());
    let ymax = finite.clone().fold(0.0f64, f64::max);
    let (ylo, yhi, map): (f64, f64, Box<dyn Fn(f64) -> f64>) = if log {
        let top = if ymax > 0.0 { ymax } else { 1.0 };
        let floor = top * 1e-12;
        let lo_raw = finite.filter(|v| *v > floor).fold(top, f64::min);
        let lo = lo_raw.max(floor).log10().floor();
        let hi = top.log10().ceil().max(lo + 1.0);
        (lo, hi, Box::new(move |v: f64| v.max(floor).log10()))
    } else {
        let hi = if ymax > 0.0 { ymax * 1.05 } else { 1.0 };
        (0.0, hi, Box::new(|v: f64| v))
    };
    let px = |t: f64| ml + (t - t0) / tspan * pw;
    let py = |v: f64| mt + ph - (map(v) - ylo) / (yhi - ylo) * ph;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<rect x=\"{ml}\" y=\"{mt}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"black\"/>\n"
    ));

    for t in nice_ticks(t0, t0 + tspan, 8) {
        let x = px(t);
        svg.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#ddd\"/>\n<text x=\"{x:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            mt,
            mt + ph,
            mt + ph + 16.0,
            t
        ));
    }
    let yticks: Vec<(f64, String)> = if log {
        (ylo as i32..=yhi as i32)
            .map(|e| (e as f64, format!("1e{e}")))
            .collect()
    } else {
        nice_ticks(ylo, yhi, 6)
            .into_iter()
            .map(|v| (v, format!("{v:.3e}")))
            .collect()
    };
    for (v, label) in yticks {
        let y = mt + ph - (v - ylo) / (yhi - ylo) * ph;
        svg.push_str(&format!(
            "<line x1=\"{ml}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#ddd\"/>\n<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\">{label}</text>\n",
            ml + pw,
            ml - 6.0,
            y + 4.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">time (days)</text>\n",
        ml + pw / 2.0,
        HEIGHT - 10.0
    ));

    for (k, xs) in series.x.iter().enumerate() {
        let pts: Vec<String> = series
            .t
            .iter()
            .zip(xs)
            .filter(|(_, v)| v.is_finite())
            .map(|(&t, &v)| format!("{:.2},{:.2}", px(t), py(v)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            COLORS[k],
            pts.join(" ")
        ));
        let ly = mt + 14.0 + 16.0 * k as f64;
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"{}\" stroke-width=\"2\"/>\n<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\">{}</text>\n",
            ml + pw - 130.0,
            ml + pw - 110.0,
            COLORS[k],
            ml + pw - 104.0,
            ly + 4.0,
            LABELS[k]
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use cart_core::simulate::Sample;
    use cart_core::State;

    fn traj() -> Trajectory {
        Trajectory {
            samples: (0..3)
                .map(|i| Sample {
                    t: i as f64 * 0.1,
                    state: State::new(1.0 + i as f64, 0.0, 1e-300),
                    tau: 0.0,
                    v: Some(0.5),
                    z2: Some(-1.0),
                })
                .collect(),
            events_applied: vec![],
        }
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(2e6), "2.0000000000000000e6");
        for v in [0.1, 1.0 / 3.0, 2.5e-300, 123456.789] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn trajectory_csv_shape() {
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &traj(), false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x1,x2,x3,tau,V,z2");
        assert!(lines[1].ends_with(",,"));
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &traj(), true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap().ends_with("5.0000000000000000e-1,-1.0000000000000000e0"));

        let s = read_series(&text).unwrap();
        assert_eq!(s.t, vec![0.0, 0.1, 0.2]);
        assert_eq!(s.x[0], vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn svg_has_three_lines() {
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &traj(), false).unwrap();
        let s = read_series(std::str::from_utf8(&buf).unwrap()).unwrap();
        for log in [false, true] {
            let svg = render_svg(&s, log);
            assert!(svg.starts_with("<svg"));
            assert_eq!(svg.matches("<polyline").count(), 3);
            assert!(!svg.contains("NaN") && !svg.contains("inf"));
        }
    }

    #[test]
    fn bad_csv() {
        assert!(read_series("t,x1\n0,1\n").is_err());
        assert!(read_series("t,x1,x2,x3\n").is_err());
        assert!(read_series("t,x1,x2,x3\n0,a,0,0\n").is_err());
    }
}

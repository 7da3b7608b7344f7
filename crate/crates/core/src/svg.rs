//! Minimal hand-emitted SVG line charts of convergence traces. One polyline
//! per trace column (distances on a log scale, the rest normalized linear),
//! each tagged with a stable `id` so consumers can verify no column was
//! dropped.

use crate::sim::EpochRecord;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 520.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

struct Series {
    name: &'static str,
    log_scale: bool,
    values: Vec<f64>,
}

fn fmt(v: f64) -> String {
    format!("{v:.3}")
}

/// Render the per-epoch records. The x axis is the tick column; every other
/// column becomes one normalized polyline with `id="series-<name>"`.
pub fn plot_trace_svg(records: &[EpochRecord]) -> String {
    let ticks: Vec<f64> = records.iter().map(|r| r.tick as f64).collect();
    let series = [
        Series {
            name: "dist_primal",
            log_scale: true,
            values: records.iter().map(|r| r.dist_primal).collect(),
        },
        Series {
            name: "dist_dual",
            log_scale: true,
            values: records.iter().map(|r| r.dist_dual).collect(),
        },
        Series {
            name: "cost",
            log_scale: false,
            values: records.iter().map(|r| r.cost).collect(),
        },
        Series {
            name: "rounded_feasible",
            log_scale: false,
            values: records
                .iter()
                .map(|r| f64::from(u8::from(r.rounded_feasible)))
                .collect(),
        },
        Series {
            name: "msgs_sent",
            log_scale: false,
            values: records.iter().map(|r| r.msgs_sent as f64).collect(),
        },
    ];

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"20\" font-size=\"14\">convergence trace (x = tick; distances log10, others min-max normalized)</text>\n",
        MARGIN
    ));

    let x_min = ticks.first().copied().unwrap_or(0.0);
    let x_max = ticks.last().copied().unwrap_or(1.0).max(x_min + 1.0);
    let x_of = |t: f64| MARGIN + (t - x_min) / (x_max - x_min) * (WIDTH - 2.0 * MARGIN);

    for (si, s) in series.iter().enumerate() {
        let transformed: Vec<f64> = s
            .values
            .iter()
            .map(|v| {
                if s.log_scale {
                    v.max(1e-16).log10()
                } else {
                    *v
                }
            })
            .collect();
        let lo = transformed.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = transformed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = if (hi - lo).abs() < 1e-300 { 1.0 } else { hi - lo };
        let y_of =
            |v: f64| HEIGHT - MARGIN - (v - lo) / span * (HEIGHT - 2.0 * MARGIN);

        let points: Vec<String> = ticks
            .iter()
            .zip(&transformed)
            .map(|(t, v)| format!("{},{}", fmt(x_of(*t)), fmt(y_of(*v))))
            .collect();
        svg.push_str(&format!(
            "<polyline id=\"series-{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            s.name,
            COLORS[si % COLORS.len()],
            points.join(" ")
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{}\">{} [{} .. {}]</text>\n",
            MARGIN,
            34.0 + 14.0 * si as f64,
            COLORS[si % COLORS.len()],
            s.name,
            fmt(lo),
            fmt(hi),
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::TRACE_HEADER;

    #[test]
    fn plot_contains_every_trace_column() {
        let records = vec![
            EpochRecord {
                tick: 0,
                epoch: 0,
                dist_primal: 1.0,
                dist_dual: 2.0,
                cost: -1.0,
                rounded_feasible: false,
                msgs_sent: 4,
            },
            EpochRecord {
                tick: 5,
                epoch: 1,
                dist_primal: 0.1,
                dist_dual: 0.2,
                cost: -0.5,
                rounded_feasible: true,
                msgs_sent: 8,
            },
        ];
        let svg = plot_trace_svg(&records);
        // Every non-axis trace column appears as a series.
        for col in TRACE_HEADER.split(',') {
            if col == "tick" || col == "epoch" {
                continue;
            }
            assert!(
                svg.contains(&format!("id=\"series-{col}\"")),
                "missing column {col}"
            );
        }
        // SVG parses as well-formed-enough XML: balanced polylines.
        assert_eq!(svg.matches("<polyline").count(), 5);
    }

    #[test]
    fn empty_trace_is_valid_svg() {
        let svg = plot_trace_svg(&[]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
    }
}

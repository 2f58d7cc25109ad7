//! Locked scenario recipes for each figure, run through the same path as
//! user scenario files.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

use super::report::{transition_table, transition_table_text, write_transition_table};
use super::{run, RunSummary, Scenario};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FigureId {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Table1,
}

impl FigureId {
    pub const ALL: [FigureId; 7] = [
        FigureId::Fig2,
        FigureId::Fig3,
        FigureId::Fig4,
        FigureId::Fig5,
        FigureId::Fig6,
        FigureId::Fig7,
        FigureId::Table1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FigureId::Fig2 => "fig2",
            FigureId::Fig3 => "fig3",
            FigureId::Fig4 => "fig4",
            FigureId::Fig5 => "fig5",
            FigureId::Fig6 => "fig6",
            FigureId::Fig7 => "fig7",
            FigureId::Table1 => "table1",
        }
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FigureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FigureId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::UnknownFigure(s.to_string()))
    }
}

/// DJ resonance of the spin-1 pair: |↓⟩|2,2⟩ ↔ |↑⟩|2,1⟩ at `J_K = (2/3) D`.
const FIG2: &str = r#"name = "fig2"
model = "s_one"

[params]
jk = -0.40
jh = -0.05
t_hop = 0.05
d = -0.60

[initial]
state = "down|2,2"

[time]
span_ps = 125.0
points = 1000

[[outputs]]
kind = "channels"
targets = ["down|2,2", "up|2,1"]

[[outputs]]
kind = "bloch"
"#;

/// Ground-state balance δ(J) for s = 1, hard and easy axis.
const FIG3: &str = r#"name = "fig3"
model = "s_one"

[[outputs]]
kind = "balance"
d = 0.60
points = 400
file = "fig3_d_positive"

[[outputs]]
kind = "balance"
d = -0.60
points = 400
file = "fig3_d_negative"
"#;

/// Relative probability |θ_in,0⟩|1,1⟩ → |θ_out,0⟩|1,0⟩ at 133 ps.
const FIG4: &str = r#"name = "fig4"
model = "s_half"

[params]
jk = -0.40
jh = -0.05
t_hop = 0.05

[[outputs]]
kind = "scan"
from = "1,1"
to = "1,0"
t_snapshot_ps = 133.0
theta_in_points = 181
theta_out_points = 181
"#;

/// Filtered evolution from |π,0⟩|1,1⟩ measured along θ = π/8.
const FIG5: &str = r#"name = "fig5"
model = "s_half"

[params]
jk = -0.40
jh = -0.05
t_hop = 0.05

[initial]
theta = "pi"
phi = 0.0
coupled = "1,1"

[time]
span_ps = 300.0
points = 3000

[[outputs]]
kind = "channels"
measure_theta = "pi/8"
measure_phi = 0.0
targets = ["1,1", "1,0", "1,-1", "0,0"]
"#;

/// Spin-1 transitions at and around the DJ resonance.
const FIG6: &str = r#"name = "fig6"
model = "s_one"

[params]
jh = -0.05
t_hop = 0.05
d = -0.60

[initial]
state = "down|2,2"

[time]
span_ps = 150.0
points = 1500

[[outputs]]
kind = "channels"
targets = ["down|2,2", "up|2,1"]

[sweep]
parameter = "jk"
values = [-0.40, -0.30, -0.50]
"#;

/// Bloch-vector probabilities of the spin-1 DJ block.
const FIG7_S_ONE: &str = r#"name = "fig7_s_one"
model = "s_one"

[params]
jk = -0.40
jh = -0.05
t_hop = 0.05
d = -0.60

[initial]
state = "down|2,2"

[time]
span_ps = 125.0
points = 1000

[[outputs]]
kind = "bloch"
"#;

/// Bloch-vector probabilities of the spin-½ block capped at 8/9.
const FIG7_S_HALF: &str = r#"name = "fig7_s_half"
model = "s_half"

[params]
jk = -0.40
jh = -0.05
t_hop = 0.05

[initial]
state = "down|1,1"

[time]
span_ps = 170.0
points = 1000

[[outputs]]
kind = "bloch"
"#;

/// The scenario files behind a figure; empty for `table1`, which is
/// computed directly.
pub fn figure_recipes(id: FigureId) -> &'static [&'static str] {
    match id {
        FigureId::Fig2 => &[FIG2],
        FigureId::Fig3 => &[FIG3],
        FigureId::Fig4 => &[FIG4],
        FigureId::Fig5 => &[FIG5],
        FigureId::Fig6 => &[FIG6],
        FigureId::Fig7 => &[FIG7_S_ONE, FIG7_S_HALF],
        FigureId::Table1 => &[],
    }
}

/// Writes the data behind a figure or table into `out_dir`.
pub fn reproduce_figure(id: FigureId, out_dir: &Path) -> Result<RunSummary> {
    if id == FigureId::Table1 {
        fs::create_dir_all(out_dir)?;
        let rows = transition_table()?;
        let path = out_dir.join("table1.csv");
        let comments = vec![
            "table: pure-state transitions".to_string(),
            "params: jh=-0.05 t_hop=0.05 d=-0.6 (s23=1); jk=-0.4 unless at resonance".to_string(),
        ];
        write_transition_table(fs::File::create(&path)?, &comments, &rows)?;
        let text = format!("{}: {} rows\n{}", path.display(), rows.len(), transition_table_text(&rows));
        return Ok(RunSummary {
            files: vec![path],
            text,
        });
    }
    let mut summary = RunSummary::default();
    for recipe in figure_recipes(id) {
        let scenario = Scenario::parse(recipe, id.name())?;
        summary.extend(run(&scenario, out_dir)?);
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for id in FigureId::ALL {
            assert_eq!(id.name().parse::<FigureId>().unwrap(), id);
        }
        let err = "fig9".parse::<FigureId>().unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn recipes_parse() {
        for id in FigureId::ALL {
            for r in figure_recipes(id) {
                Scenario::parse(r, id.name()).unwrap();
            }
        }
    }
}

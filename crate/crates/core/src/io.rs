//! Run configuration files, metrics CSV and field snapshots.
//!
//! The configuration is a sectioned `key = value` file:
//!
//! ```text
//! # comments start with '#' or ';'
//! [mesh]      half_width | xmin xmax ymin ymax, n_sub, diagonal = forward|backward
//! [params]    kappa1 alpha beta1 beta2 gamma delta
//! [ic]        scenario = ring|surface|custom, tumor_x, tumor_y, tumor_radius, tumor_peak,
//!             vasculature = uniform|zones, vasculature_level, vasculature_base,
//!             zone = x, y, radius, level   (repeatable), necrosis
//! [solver]    dt, t_final, cg_tolerance, cg_max_iterations
//! [output]    dir, metrics_every, snapshot_every, threshold, vtk = true|false
//! ```
//!
//! Omitted keys keep the selected scenario's defaults; unknown keys and
//! sections are rejected.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::experiments::{
    default_zones, scenario_ring_width, scenario_surface_regularity, Scenario, VasculatureIc,
    ZoneSpec, DEFAULT_UNIFORM_VASCULATURE,
};
use crate::mesh::{Bounds, Diagonal, StructuredTriMesh};
use crate::metrics::MetricsSample;
use crate::model::ParamName;
use crate::solver::SimulationState;

pub const METRICS_HEADER: &str = "t,rq,sq,area,r_max,int_T,int_TN,int_phi";
pub const SNAPSHOT_HEADER: &str = "x,y,T,N,Phi";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ScenarioKind {
    #[default]
    Ring,
    Surface,
    Custom,
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ring" => Ok(ScenarioKind::Ring),
            "surface" => Ok(ScenarioKind::Surface),
            "custom" => Ok(ScenarioKind::Custom),
            _ => Err(format!(
                "unknown scenario `{s}` (expected ring, surface or custom)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub kind: ScenarioKind,
    pub scenario: Scenario,
    pub output_dir: Option<PathBuf>,
    pub write_vtk: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            kind: ScenarioKind::Ring,
            scenario: scenario_ring_width(&[]),
            output_dir: None,
            write_vtk: false,
        }
    }
}

struct Entry<'a> {
    line: usize,
    section: &'a str,
    key: &'a str,
    value: &'a str,
}

const SECTIONS: [&str; 5] = ["mesh", "params", "ic", "solver", "output"];

fn config_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

fn parse_value<T: FromStr>(e: &Entry) -> Result<T> {
    e.value.parse().map_err(|_| {
        config_err(
            e.line,
            format!("cannot parse `{}` for key `{}`", e.value, e.key),
        )
    })
}

fn parse_f64(e: &Entry) -> Result<f64> {
    let v: f64 = parse_value(e)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(config_err(e.line, format!("`{}` must be finite", e.key)))
    }
}

fn parse_positive(e: &Entry) -> Result<f64> {
    let v = parse_f64(e)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(config_err(
            e.line,
            format!("`{}` must be > 0, got {v}", e.key),
        ))
    }
}

fn parse_unit(e: &Entry) -> Result<f64> {
    let v = parse_f64(e)?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(config_err(
            e.line,
            format!("`{}` must lie in [0, 1], got {v}", e.key),
        ))
    }
}

fn parse_count(e: &Entry) -> Result<usize> {
    let v: usize = parse_value(e)?;
    if v >= 1 {
        Ok(v)
    } else {
        Err(config_err(e.line, format!("`{}` must be >= 1", e.key)))
    }
}

fn parse_zone(e: &Entry) -> Result<ZoneSpec> {
    let parts: Vec<&str> = e.value.split(',').map(str::trim).collect();
    let nums = parts
        .iter()
        .map(|p| p.parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| config_err(e.line, "zone expects `x, y, radius, level`"))?;
    let [x, y, radius, level] = nums[..] else {
        return Err(config_err(e.line, "zone expects `x, y, radius, level`"));
    };
    if !(radius > 0.0) || !(0.0..=1.0).contains(&level) {
        return Err(config_err(
            e.line,
            "zone radius must be > 0 and level in [0, 1]",
        ));
    }
    Ok(ZoneSpec {
        center: [x, y],
        radius,
        level,
    })
}

fn tokenize(text: &str) -> Result<Vec<Entry<'_>>> {
    let mut section: Option<&str> = None;
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with(';') {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| config_err(line, "unterminated section header"))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(config_err(line, format!("unknown section `[{name}]`")));
            }
            section = Some(name);
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| config_err(line, "expected `key = value`"))?;
        let section = section.ok_or_else(|| config_err(line, "key outside of any section"))?;
        entries.push(Entry {
            line,
            section,
            key: key.trim(),
            value: value.trim(),
        });
    }
    Ok(entries)
}

/// Parse a configuration file into a fully resolved [`RunConfig`].
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let entries = tokenize(text)?;

    // The scenario preset supplies defaults, so it is applied before anything else.
    let mut kind = ScenarioKind::Ring;
    for e in entries
        .iter()
        .filter(|e| e.section == "ic" && e.key == "scenario")
    {
        kind = e.value.parse().map_err(|m: String| config_err(e.line, m))?;
    }
    let mut scenario = match kind {
        ScenarioKind::Ring | ScenarioKind::Custom => scenario_ring_width(&[]),
        ScenarioKind::Surface => scenario_surface_regularity(&[]),
    };
    let mut cfg = RunConfig {
        kind,
        ..RunConfig::default()
    };

    let mut vasculature_mode: Option<(usize, String)> = None;
    let mut level: Option<f64> = None;
    let mut base: Option<f64> = None;
    let mut zones: Vec<ZoneSpec> = Vec::new();
    let mut last_line = 0;

    for e in &entries {
        last_line = e.line;
        let s = &mut scenario;
        match (e.section, e.key) {
            ("mesh", "half_width") => s.mesh.bounds = Bounds::centered_square(parse_positive(e)?),
            ("mesh", "xmin") => s.mesh.bounds.xmin = parse_f64(e)?,
            ("mesh", "xmax") => s.mesh.bounds.xmax = parse_f64(e)?,
            ("mesh", "ymin") => s.mesh.bounds.ymin = parse_f64(e)?,
            ("mesh", "ymax") => s.mesh.bounds.ymax = parse_f64(e)?,
            ("mesh", "n_sub") => s.mesh.n_sub = parse_count(e)?,
            ("mesh", "diagonal") => {
                s.mesh.diagonal = match e.value {
                    "forward" => Diagonal::Forward,
                    "backward" => Diagonal::Backward,
                    other => return Err(config_err(e.line, format!("unknown diagonal `{other}`"))),
                }
            }
            ("params", key) => {
                let name: ParamName = key
                    .parse()
                    .map_err(|_| config_err(e.line, format!("unknown key `{key}` in [params]")))?;
                let v = parse_f64(e)?;
                if v < 0.0 {
                    return Err(config_err(e.line, format!("`{key}` must be >= 0, got {v}")));
                }
                s.params.set(name, v);
            }
            ("ic", "scenario") => {}
            ("ic", "tumor_x") => s.tumor_ic.center[0] = parse_f64(e)?,
            ("ic", "tumor_y") => s.tumor_ic.center[1] = parse_f64(e)?,
            ("ic", "tumor_radius") => s.tumor_ic.radius = parse_positive(e)?,
            ("ic", "tumor_peak") => {
                let v = parse_unit(e)?;
                if v == 0.0 {
                    return Err(config_err(e.line, "`tumor_peak` must be > 0"));
                }
                s.tumor_ic.peak = v;
            }
            ("ic", "vasculature") => vasculature_mode = Some((e.line, e.value.to_string())),
            ("ic", "vasculature_level") => level = Some(parse_unit(e)?),
            ("ic", "vasculature_base") => base = Some(parse_unit(e)?),
            ("ic", "zone") => zones.push(parse_zone(e)?),
            ("ic", "necrosis") => s.necrosis_ic = parse_unit(e)?,
            ("solver", "dt") => s.solver.dt = parse_positive(e)?,
            ("solver", "t_final") => {
                let v = parse_f64(e)?;
                if v < 0.0 {
                    return Err(config_err(e.line, "`t_final` must be >= 0"));
                }
                s.solver.t_final = v;
            }
            ("solver", "cg_tolerance") => {
                let v = parse_positive(e)?;
                if v >= 1.0 {
                    return Err(config_err(e.line, "`cg_tolerance` must be < 1"));
                }
                s.solver.cg_tolerance = v;
            }
            ("solver", "cg_max_iterations") => s.solver.cg_max_iterations = parse_count(e)?,
            ("output", "dir") => cfg.output_dir = Some(PathBuf::from(e.value)),
            ("output", "metrics_every") => s.solver.metrics_every = parse_count(e)?,
            ("output", "snapshot_every") => s.solver.snapshot_every = parse_count(e)?,
            ("output", "threshold") => s.threshold = parse_positive(e)?,
            ("output", "vtk") => cfg.write_vtk = parse_value(e)?,
            (section, key) => {
                return Err(config_err(
                    e.line,
                    format!("unknown key `{key}` in [{section}]"),
                ))
            }
        }
    }

    let zoned = match &vasculature_mode {
        Some((line, m)) => match m.as_str() {
            "uniform" => Some(false),
            "zones" => Some(true),
            other => {
                return Err(config_err(
                    *line,
                    format!("unknown vasculature mode `{other}`"),
                ))
            }
        },
        None if !zones.is_empty() || base.is_some() => Some(true),
        None if level.is_some() => Some(false),
        None => None,
    };
    match zoned {
        Some(true) => {
            let (preset_base, preset_zones) = match (&scenario.vasculature_ic, &default_zones()) {
                (VasculatureIc::Zones { base, zones }, _)
                | (_, VasculatureIc::Zones { base, zones }) => (*base, zones.clone()),
                _ => unreachable!("default_zones is zoned"),
            };
            scenario.vasculature_ic = VasculatureIc::Zones {
                base: base.unwrap_or(preset_base),
                zones: if zones.is_empty() {
                    preset_zones
                } else {
                    zones
                },
            };
        }
        Some(false) => {
            let preset = match scenario.vasculature_ic {
                VasculatureIc::Uniform(l) => l,
                VasculatureIc::Zones { .. } => DEFAULT_UNIFORM_VASCULATURE,
            };
            scenario.vasculature_ic = VasculatureIc::Uniform(level.unwrap_or(preset));
        }
        None => {}
    }

    scenario
        .validate()
        .and_then(|_| scenario.build_mesh().map(|_| ()))
        .map_err(|err| config_err(last_line, err.to_string()))?;
    cfg.scenario = scenario;
    Ok(cfg)
}

pub fn read_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Shortest decimal that parses back to the same `f64`: plain notation for
/// moderate magnitudes, exponent notation for tiny or huge ones.
pub fn format_number(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) || !a.is_finite() {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// Serialize a metrics series; every value uses the shortest round-trip decimal.
pub fn format_metrics_csv(series: &[MetricsSample]) -> Result<String> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mut out = String::with_capacity(64 * (series.len() + 1));
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for s in series {
        if !(0.0..=1.0).contains(&s.rq) {
            return Err(Error::InvalidSample {
                time: s.time,
                reason: format!("rq = {} outside [0, 1]", s.rq),
            });
        }
        if !(s.area >= 0.0) {
            return Err(Error::InvalidSample {
                time: s.time,
                reason: format!("negative area {}", s.area),
            });
        }
        let row = [
            s.time,
            s.rq,
            s.sq,
            s.area,
            s.r_max,
            s.tumor_density,
            s.total_tn_density,
            s.phi_density,
        ];
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format_number(*v));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_metrics_csv(series: &[MetricsSample], path: &Path) -> Result<()> {
    let text = format_metrics_csv(series)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Per-vertex `x,y,T,N,Phi` in vertex order.
pub fn write_snapshot(
    state: &SimulationState,
    mesh: &StructuredTriMesh,
    path: &Path,
) -> Result<()> {
    crate::error::check_len(mesh.n_vertices(), state.len())?;
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "{SNAPSHOT_HEADER}").map_err(io)?;
    for (v, p) in mesh.vertices().iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{}",
            format_number(p[0]),
            format_number(p[1]),
            format_number(state.t_field[v]),
            format_number(state.n_field[v]),
            format_number(state.phi_field[v])
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Legacy ASCII VTK unstructured grid with point arrays `T`, `N`, `Phi`.
pub fn write_snapshot_vtk(
    state: &SimulationState,
    mesh: &StructuredTriMesh,
    path: &Path,
) -> Result<()> {
    crate::error::check_len(mesh.n_vertices(), state.len())?;
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    let n = mesh.n_vertices();
    let tris = mesh.triangles();
    writeln!(w, "# vtk DataFile Version 3.0").map_err(io)?;
    writeln!(w, "tumor snapshot t={}", state.time).map_err(io)?;
    writeln!(w, "ASCII").map_err(io)?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID").map_err(io)?;
    writeln!(w, "POINTS {n} double").map_err(io)?;
    for p in mesh.vertices() {
        writeln!(w, "{} {} 0", p[0], p[1]).map_err(io)?;
    }
    writeln!(w, "CELLS {} {}", tris.len(), 4 * tris.len()).map_err(io)?;
    for t in tris {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2]).map_err(io)?;
    }
    writeln!(w, "CELL_TYPES {}", tris.len()).map_err(io)?;
    for _ in tris {
        // VTK_TRIANGLE
        writeln!(w, "5").map_err(io)?;
    }
    writeln!(w, "POINT_DATA {n}").map_err(io)?;
    for (name, field) in [
        ("T", &state.t_field),
        ("N", &state.n_field),
        ("Phi", &state.phi_field),
    ] {
        writeln!(w, "SCALARS {name} double 1").map_err(io)?;
        writeln!(w, "LOOKUP_TABLE default").map_err(io)?;
        for &v in field {
            writeln!(w, "{}", format_number(v)).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::DEFAULT_PARAMS;
    use crate::mesh::build_mesh;

    #[test]
    fn numbers_round_trip_in_compact_form() {
        for v in [
            0.0,
            1.0,
            -2.5,
            0.1,
            1.0 / 3.0,
            1e-5,
            9.99e-6,
            1e-300,
            5e-324,
            1e16,
            123456789.125,
            -7.2e-310,
        ] {
            let text = format_number(v);
            assert_eq!(
                text.parse::<f64>().unwrap().to_bits(),
                v.to_bits(),
                "{text}"
            );
            assert!(text.len() <= 24, "{text}");
        }
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(1e-300), "1e-300");
    }

    fn sample(time: f64, rq: f64) -> MetricsSample {
        MetricsSample {
            time,
            rq,
            sq: 0.75,
            area: 12.5,
            r_max: 2.0,
            tumor_density: 1.0 / 3.0,
            total_tn_density: 0.5,
            phi_density: 162.0,
        }
    }

    #[test]
    fn empty_config_is_ring_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.scenario, scenario_ring_width(&[]));
    }

    #[test]
    fn param_override() {
        let cfg = parse_config("[params]\nalpha=100").unwrap();
        assert_eq!(
            cfg.scenario.params,
            DEFAULT_PARAMS.with(ParamName::Alpha, 100.0)
        );
    }

    #[test]
    fn typo_names_line() {
        let err = parse_config("[params]\nalhpa=100").unwrap_err();
        match err {
            Error::Config { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("alhpa"), "{message}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn malformed_configs() {
        for (text, line) in [
            ("[mesh]\nn_sub = 0", 2),
            ("[solver]\ndt = -1", 2),
            ("[solver]\ndt = abc", 2),
            ("[bogus]\nx=1", 1),
            ("alpha = 3", 1),
            ("[params]\n\nalpha", 3),
            ("[ic]\ntumor_peak = 1.5", 2),
            ("[ic]\nscenario = disc", 2),
            ("[ic]\nzone = 1, 2, 3", 2),
            ("[output]\nmetrics_every = 0", 2),
        ] {
            match parse_config(text) {
                Err(Error::Config { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn full_config() {
        let text = "\
# surface study
[mesh]
half_width = 6
n_sub = 30
diagonal = backward
[params]
kappa1 = 10
[ic]
scenario = surface
zone = 1, 1, 2, 0.9
zone = -2, -2, 1.5, 0.3
vasculature_base = 0.05
necrosis = 0
[solver]
dt = 0.002
t_final = 3
[output]
dir = out/run1
metrics_every = 10
snapshot_every = 500
threshold = 0.01
vtk = true
";
        let cfg = parse_config(text).unwrap();
        let s = &cfg.scenario;
        assert_eq!(cfg.kind, ScenarioKind::Surface);
        assert_eq!(s.mesh.bounds, Bounds::centered_square(6.0));
        assert_eq!(s.mesh.diagonal, Diagonal::Backward);
        assert_eq!(s.params.kappa1, 10.0);
        assert_eq!(s.solver.t_final, 3.0);
        assert_eq!(s.solver.metrics_every, 10);
        assert_eq!(s.threshold, 0.01);
        assert!(cfg.write_vtk);
        assert_eq!(cfg.output_dir, Some(PathBuf::from("out/run1")));
        match &s.vasculature_ic {
            VasculatureIc::Zones { base, zones } => {
                assert_eq!(*base, 0.05);
                assert_eq!(zones.len(), 2);
                assert_eq!(zones[1].center, [-2.0, -2.0]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn surface_preset_keeps_default_zones() {
        let cfg = parse_config("[ic]\nscenario = surface").unwrap();
        assert_eq!(cfg.scenario, scenario_surface_regularity(&[]));
        let cfg = parse_config(
            "[ic]\nscenario = surface\nvasculature = uniform\nvasculature_level = 0.3",
        )
        .unwrap();
        assert_eq!(cfg.scenario.vasculature_ic, VasculatureIc::Uniform(0.3));
    }

    #[test]
    fn metrics_csv_format() {
        let text = format_metrics_csv(&[sample(0.0, 1.0)]).unwrap();
        assert_eq!(
            text,
            "t,rq,sq,area,r_max,int_T,int_TN,int_phi\n0,1,0.75,12.5,2,0.3333333333333333,0.5,162\n"
        );
        assert_eq!(text.lines().count(), 2);
        assert!(matches!(format_metrics_csv(&[]), Err(Error::EmptySeries)));
        assert!(matches!(
            format_metrics_csv(&[sample(1.0, 1.5)]),
            Err(Error::InvalidSample { .. })
        ));
    }

    #[test]
    fn metrics_file_is_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let series: Vec<_> = (0..20)
            .map(|i| sample(i as f64 * 0.1, 1.0 / (i + 1) as f64))
            .collect();
        let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
        write_metrics_csv(&series, &a).unwrap();
        write_metrics_csv(&series, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = build_mesh(Bounds::new(0.0, 1.0, 0.0, 1.0), 1).unwrap();
        let state = SimulationState::new(
            0.5,
            vec![0.1, 1.0 / 3.0, 2e-17, 0.0],
            vec![0.0, 0.25, 0.5, 0.75],
            vec![0.9, std::f64::consts::PI / 4.0, 0.0, 1.0],
        )
        .unwrap();
        let path = dir.path().join("snap.csv");
        write_snapshot(&state, &mesh, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], SNAPSHOT_HEADER);
        for (v, line) in lines[1..].iter().enumerate() {
            let vals: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
            assert_eq!(vals[0..2], mesh.vertices()[v]);
            assert_eq!(vals[2], state.t_field[v]);
            assert_eq!(vals[3], state.n_field[v]);
            assert_eq!(vals[4], state.phi_field[v]);
        }
    }

    #[test]
    fn vtk_layout() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = build_mesh(Bounds::new(0.0, 1.0, 0.0, 1.0), 2).unwrap();
        let state = SimulationState::uniform(
            mesh.n_vertices(),
            crate::model::FieldTriple::new(0.1, 0.2, 0.3),
        );
        let path = dir.path().join("snap.vtk");
        write_snapshot_vtk(&state, &mesh, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(text.contains("DATASET UNSTRUCTURED_GRID\nPOINTS 9 double\n"));
        assert!(text.contains("CELLS 8 32\n"));
        assert!(text.contains("CELL_TYPES 8\n"));
        assert!(text.contains("POINT_DATA 9\nSCALARS T double 1\nLOOKUP_TABLE default\n"));
        assert!(text.contains("SCALARS N double 1"));
        assert!(text.contains("SCALARS Phi double 1"));
    }
}

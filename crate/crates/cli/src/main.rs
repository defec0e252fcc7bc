use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use foldtorus::autos::Autos;
use foldtorus::billiard::{build_cross_scene, trace_ray, Orientation, RayTrace};
use foldtorus::cover::{
    deviation_records, deviation_records_of, deviation_series, f1_start, lemma4_sequence, lift_trace, stream_trace, CoverPoint,
    DeviationRecords, DeviationSample, PlanarTrace, PlaneGrid, Shore,
};
use foldtorus::export::{self, Drawing};
use foldtorus::flow::{
    budget_param, cylinder_decomposition, saddle_connection_search, short, trace_leaf, ChartSegment, CoverageGrid, LeafTrace, Mode, TraceOptions, SNAP_TOL,
};
use foldtorus::surface::angle_label;
use foldtorus::verify::verify_autos;
use foldtorus::{canonical_t, Error, FieldElem, Point, Scalar, Surface, SurfacePoint, Vec2};

#[derive(Parser)]
#[command(name = "foldtorus", version, about = "Exact experiments on the folded torus and its plane cover")]
struct Cli {
    /// Arithmetic for traces: exact or float.
    #[arg(long, global = true, default_value = "exact")]
    mode: Mode,
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Surface JSON file; defaults to the canonical folded torus.
    #[arg(long, global = true)]
    surface: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct Output {
    /// Write CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write an SVG rendering here.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Cone points, area and validity of the surface.
    SurfaceInfo,
    /// Cylinder decomposition in a periodic direction.
    Cylinders {
        #[arg(long, value_parser = point)]
        dir: Point,
        #[arg(long, value_parser = elem, default_value = "100")]
        budget: FieldElem,
    },
    /// Trace a leaf on the surface, or its lift with --cover.
    Trace {
        #[arg(long, value_parser = point)]
        start: Point,
        #[arg(long, value_parser = point)]
        dir: Point,
        #[arg(long, value_parser = elem)]
        budget: FieldElem,
        #[arg(long)]
        cover: bool,
        /// Shore for cover starts on a slit: + or -.
        #[arg(long, value_parser = shore)]
        shore: Option<Shore>,
        #[command(flatten)]
        output: Output,
    },
    /// Cell coverage as the budget grows.
    Density {
        #[arg(long, default_value_t = 1.0 / 32.0)]
        epsilon: f64,
        #[arg(long, value_parser = elem)]
        budget: FieldElem,
        #[arg(long)]
        cover: bool,
        /// Half-width R of the window [-R, R]^2 on the cover.
        #[arg(long, default_value_t = 10.0)]
        window: f64,
        #[arg(long, value_parser = point)]
        start: Option<Point>,
        #[arg(long, value_parser = point)]
        dir: Option<Point>,
        #[arg(long, value_parser = shore)]
        shore: Option<Shore>,
        /// Number of evenly spaced budgets reported.
        #[arg(long, default_value_t = 10)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Record deviation of a lifted leaf from its launch line.
    Deviation {
        #[arg(long, value_parser = elem)]
        budget: FieldElem,
        #[arg(long, value_parser = point)]
        start: Option<Point>,
        #[arg(long, value_parser = point)]
        dir: Option<Point>,
        #[arg(long, value_parser = shore)]
        shore: Option<Shore>,
        /// Sample the full series at this arclength step instead of records.
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check derivatives, homology action and permutations; exit 1 on failure.
    VerifyAutos,
    /// Contraction of (vHv)^4 along the contracting leaf through (3,0)+.
    Lemma4 {
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Saddle connections in a direction up to a length budget.
    Connections {
        #[arg(long, value_parser = point)]
        dir: Point,
        #[arg(long, value_parser = elem)]
        budget: FieldElem,
    },
    /// A ray among mirror crosses.
    Billiard {
        #[arg(long, value_parser = elem, default_value = "1/4")]
        arm: FieldElem,
        #[arg(long, value_parser = point, default_value = "1,1")]
        dir: Point,
        #[arg(long, value_parser = elem)]
        budget: FieldElem,
        #[arg(long, value_parser = point, default_value = "1/7*rt3,1/3")]
        start: Point,
        #[arg(long, default_value = "axis")]
        orientation: Orientation,
        #[command(flatten)]
        output: Output,
    },
}

fn point(s: &str) -> Result<Point, String> {
    Vec2::parse_pair(s).map_err(|e| e.to_string())
}

fn elem(s: &str) -> Result<FieldElem, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn shore(s: &str) -> Result<Shore, String> {
    match s {
        "+" | "plus" => Ok(Shore::Plus),
        "-" | "minus" => Ok(Shore::Minus),
        _ => Err(format!("shore `{s}` (expected + or -)")),
    }
}

struct Report {
    text: String,
    json: Value,
    ok: bool,
}

impl Report {
    fn new(text: String, json: Value) -> Self {
        Report { text, json, ok: true }
    }
}

type Run = Result<Report, Error>;

fn pt(p: &Point) -> Value {
    json!([p.x.to_string(), p.y.to_string()])
}

fn fpt<S: Scalar>(p: &Vec2<S>) -> Value {
    json!([p.x.to_f64(), p.y.to_f64()])
}

fn write(path: &Option<PathBuf>, content: &str) -> Result<(), Error> {
    if let Some(p) = path {
        fs::write(p, content).map_err(|e| Error::InvalidParameter(format!("cannot write {}: {e}", p.display())))?;
    }
    Ok(())
}

fn load_surface(path: &Option<PathBuf>) -> Result<Surface, Error> {
    match path {
        None => Ok(canonical_t()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::InvalidParameter(format!("cannot read {}: {e}", p.display())))?;
            Surface::from_json_str(&text)
        }
    }
}

fn surface_info(s: &Surface) -> Run {
    let mut census = s.cone_census();
    census.sort_by_key(|c| c.angle_pi);
    let angles: Vec<String> = census.iter().map(|c| angle_label(c.angle_pi)).collect();
    let report = s.validate();
    let mut text = format!("{}; area {}\n", angles.join(", "), short(&s.area()));
    for c in &census {
        text.push_str(&format!("  {c}\n"));
    }
    text.push_str(&format!("euler characteristic {}\n", s.euler_characteristic()));
    text.push_str(if report.ok { "valid\n" } else { "invalid\n" });
    for issue in &report.issues {
        text.push_str(&format!("  {issue}\n"));
    }
    let cones: Vec<Value> = census
        .iter()
        .map(|c| json!({"label": c.label, "angle_pi": c.angle_pi, "poly": c.representative.poly, "point": pt(&c.representative.p)}))
        .collect();
    let j = json!({
        "census": angles,
        "cones": cones,
        "area": s.area().to_string(),
        "euler_characteristic": s.euler_characteristic(),
        "valid": report.ok,
        "issues": report.issues,
    });
    let mut r = Report::new(text, j);
    r.ok = report.ok;
    Ok(r)
}

fn cylinders(s: &Surface, dir: &Point, budget: &FieldElem) -> Run {
    let d = cylinder_decomposition(s, dir, budget)?;
    let mut text = format!("direction {dir}: {} cylinder(s), {} saddle connection(s)\n", d.cylinders.len(), d.connections.len());
    for c in &d.cylinders {
        text.push_str(&format!("  circumference {}, width {} ({})\n", short(&c.circumference), short(&c.width), c.label()));
    }
    let cyl: Vec<Value> = d
        .cylinders
        .iter()
        .map(|c| json!({"circumference": c.circumference.to_string(), "width": c.width.to_string(), "area": c.area().to_string()}))
        .collect();
    Ok(Report::new(text, json!({"direction": pt(dir), "cylinders": cyl, "saddle_connections": d.connections.len()})))
}

fn cone_label(s: &Surface, id: usize) -> String {
    s.cone_point(id).map_or(format!("#{id}"), |c| c.label)
}

fn connections(s: &Surface, dir: &Point, budget: &FieldElem) -> Run {
    let conns = saddle_connection_search(s, dir, budget)?;
    let mut text = format!("{} saddle connection(s) in direction {dir} up to length {}\n", conns.len(), short(budget));
    let mut rows = Vec::new();
    for c in &conns {
        let (from, to) = (cone_label(s, c.from.cone), cone_label(s, c.to.cone));
        text.push_str(&format!("  {from} -> {to}  length {}\n", short(&c.trace.arclength)));
        rows.push(json!({"from": from, "to": to, "length": c.trace.arclength.to_string(), "direction": pt(&c.from.dir)}));
    }
    Ok(Report::new(text, json!({"direction": pt(dir), "connections": rows})))
}

fn surface_drawing<S: Scalar>(s: &Surface, segments: &[ChartSegment<S>]) -> Drawing {
    Drawing {
        outlines: s.polygons().iter().map(|p| p.iter().map(Vec2::to_f64).collect()).collect(),
        segments: segments.iter().map(|g| (g.a.to_f64s(), g.b.to_f64s())).collect(),
        marks: s.cone_census().iter().map(|c| (c.representative.p.to_f64(), c.label.clone())).collect(),
    }
}

fn plane_drawing<S: Scalar>(segments: &[(Vec2<S>, Vec2<S>)], slits: bool) -> Drawing {
    let segs: Vec<(Vec2<f64>, Vec2<f64>)> = segments.iter().map(|(a, b)| (a.to_f64s(), b.to_f64s())).collect();
    let mut d = Drawing { segments: segs, ..Drawing::default() };
    if slits {
        let (mut x0, mut y0, mut x1, mut y1) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for (a, b) in &d.segments {
            x0 = x0.min(a.x.min(b.x));
            x1 = x1.max(a.x.max(b.x));
            y0 = y0.min(a.y.min(b.y));
            y1 = y1.max(a.y.max(b.y));
        }
        for n in y0.floor() as i64..=y1.ceil() as i64 {
            for m in (x0 / 3.0).floor() as i64..=(x1 / 3.0).ceil() as i64 {
                let (c, y) = (3.0 * m as f64, n as f64);
                d.outlines.push(vec![Vec2::new(c - 1.0, y), Vec2::new(c + 1.0, y)]);
            }
        }
    }
    d
}

fn leaf_report<S: Scalar>(t: &LeafTrace<S>, exact: Option<&LeafTrace<FieldElem>>) -> Report {
    let end = t.end().expect("nonempty trace");
    let mut text = format!(
        "{} segment(s), {:?}, length {:.9}{}\nend poly {} ({:.9}, {:.9})\n",
        t.segments.len(),
        t.termination,
        t.arclength_f64(),
        if t.direction_units { " (direction units)" } else { "" },
        end.poly,
        end.p.x.to_f64(),
        end.p.y.to_f64()
    );
    let mut j = json!({
        "segments": t.segments.len(),
        "termination": format!("{:?}", t.termination),
        "arclength": t.arclength_f64(),
        "direction_units": t.direction_units,
        "end": {"poly": end.poly, "point": fpt(&end.p)},
    });
    if let Some(e) = exact {
        let ee = e.end().expect("nonempty trace");
        text.push_str(&format!("exact end {}\n", ee.p));
        j["end"]["exact"] = pt(&ee.p);
        j["arclength_exact"] = json!(e.arclength.to_string());
    }
    Report::new(text, j)
}

fn planar_report<S: Scalar>(t: &PlanarTrace<S>, exact: Option<&PlanarTrace<FieldElem>>) -> Report {
    let end = &t.segments.last().expect("nonempty trace").1;
    let mut text = format!(
        "{} segment(s), {:?}, length {:.9}{}\nend ({:.9}, {:.9})\n",
        t.segments.len(),
        t.termination,
        t.arclength_f64(),
        if t.direction_units { " (direction units)" } else { "" },
        end.x.to_f64(),
        end.y.to_f64()
    );
    let mut j = json!({
        "segments": t.segments.len(),
        "termination": format!("{:?}", t.termination),
        "arclength": t.arclength_f64(),
        "direction_units": t.direction_units,
        "end": {"point": fpt(end)},
    });
    if let Some(e) = exact {
        let ee = &e.segments.last().expect("nonempty trace").1;
        text.push_str(&format!("exact end {ee}\n"));
        j["end"]["exact"] = pt(ee);
    }
    Report::new(text, j)
}

#[allow(clippy::too_many_arguments)]
fn trace(cli: &Cli, start: &Point, dir: &Point, budget: &FieldElem, cover: bool, shore: Option<Shore>, output: &Output) -> Run {
    let opts = TraceOptions::default();
    if cover {
        let cp = CoverPoint::new(start.clone(), shore);
        match cli.mode {
            Mode::Exact => {
                let t = lift_trace::<FieldElem>(&cp, dir, budget, 0.0)?;
                write(&output.out, &export::trace_csv(&export::planar(&t.segments)))?;
                write(&output.svg, &plane_drawing(&t.segments, true).to_svg(800.0))?;
                Ok(planar_report(&t, Some(&t)))
            }
            Mode::Float => {
                let t = lift_trace::<f64>(&cp, dir, budget, SNAP_TOL)?;
                write(&output.out, &export::trace_csv_float(&export::planar(&t.segments)))?;
                write(&output.svg, &plane_drawing(&t.segments, true).to_svg(800.0))?;
                Ok(planar_report(&t, None))
            }
        }
    } else {
        let s = load_surface(&cli.surface)?;
        let sp = SurfacePoint::new(0, start.clone());
        match cli.mode {
            Mode::Exact => {
                let t = trace_leaf::<FieldElem>(&s, &sp, dir, budget, &opts)?;
                write(&output.out, &export::trace_csv(&t.segments))?;
                write(&output.svg, &surface_drawing(&s, &t.segments).to_svg(800.0))?;
                Ok(leaf_report(&t, Some(&t)))
            }
            Mode::Float => {
                let t = trace_leaf::<f64>(&s, &sp, dir, budget, &opts)?;
                write(&output.out, &export::trace_csv_float(&t.segments))?;
                write(&output.svg, &surface_drawing(&s, &t.segments).to_svg(800.0))?;
                Ok(leaf_report(&t, None))
            }
        }
    }
}

/// Coverage after each of `samples` evenly spaced arclengths.
fn checkpoints(total: f64, samples: usize) -> Vec<f64> {
    (1..=samples.max(1)).map(|i| total * i as f64 / samples.max(1) as f64).collect()
}

fn record_coverage<I: Iterator<Item = (Vec2<f64>, Vec2<f64>)>>(segs: I, marks: &[f64], mut mark: impl FnMut(&Vec2<f64>, &Vec2<f64>), cov: impl Fn() -> f64) -> Vec<(f64, f64)> {
    let mut rows = Vec::new();
    let mut acc = 0.0;
    let mut next = 0;
    for (a, b) in segs {
        let len = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt();
        while next < marks.len() && marks[next] < acc {
            rows.push((marks[next], cov()));
            next += 1;
        }
        mark(&a, &b);
        acc += len;
    }
    while next < marks.len() {
        rows.push((marks[next], cov()));
        next += 1;
    }
    rows
}

#[allow(clippy::too_many_arguments)]
fn density(cli: &Cli, epsilon: f64, budget: &FieldElem, cover: bool, window: f64, start: &Option<Point>, dir: &Option<Point>, shore: Option<Shore>, samples: usize) -> Result<(Report, String), Error> {
    let (f1, f1_dir) = f1_start();
    let dir = dir.clone().unwrap_or(f1_dir);
    let total = budget.to_f64();
    let marks = checkpoints(total, samples);
    let rows = if cover {
        let (start, shore) = match start {
            Some(p) => (p.clone(), shore),
            None => (f1.p.clone(), f1.shore),
        };
        let cp = CoverPoint::new(start, shore);
        let grid = std::cell::RefCell::new(PlaneGrid::new(window, epsilon)?);
        let cov = || grid.borrow().coverage();
        match cli.mode {
            Mode::Exact => {
                let t = lift_trace::<FieldElem>(&cp, &dir, budget, 0.0)?;
                let segs = t.segments.iter().map(|(a, b)| (a.to_f64(), b.to_f64()));
                record_coverage(segs, &marks, |a, b| grid.borrow_mut().mark_segment(a, b), cov)
            }
            Mode::Float => {
                let mut rows = Vec::new();
                let mut next = 0;
                stream_trace(&cp.to_f64(), &dir.to_f64(), total, SNAP_TOL, |a, b, s| {
                    while next < marks.len() && marks[next] < s {
                        rows.push((marks[next], grid.borrow().coverage()));
                        next += 1;
                    }
                    grid.borrow_mut().mark_segment(a, b);
                })?;
                while next < marks.len() {
                    rows.push((marks[next], grid.borrow().coverage()));
                    next += 1;
                }
                rows
            }
        }
    } else {
        let s = load_surface(&cli.surface)?;
        let start = start.clone().unwrap_or_else(|| Vec2::new(FieldElem::rational(1, 2), FieldElem::rational(1, 3)));
        let sp = SurfacePoint::new(0, start);
        let opts = TraceOptions { detect_closure: false, ..TraceOptions::default() };
        let grid = std::cell::RefCell::new(CoverageGrid::new(&s, epsilon)?);
        let segs: Vec<ChartSegment<f64>> = match cli.mode {
            Mode::Exact => trace_leaf::<FieldElem>(&s, &sp, &dir, budget, &opts)?.segments.iter().map(ChartSegment::to_f64).collect(),
            Mode::Float => trace_leaf::<f64>(&s, &sp, &dir, budget, &opts)?.segments,
        };
        let mut polys = segs.iter().map(|g| g.poly);
        let pairs = segs.iter().map(|g| (g.a.clone(), g.b.clone()));
        record_coverage(pairs, &marks, |a, b| grid.borrow_mut().mark_segment(polys.next().expect("aligned"), a.clone(), b.clone()), || grid.borrow().coverage())
    };
    let mut text = format!("{} coverage at epsilon {epsilon}\n", if cover { "plane" } else { "surface" });
    for (l, c) in &rows {
        text.push_str(&format!("  length {l}: {c:.6}\n"));
    }
    let j = json!({
        "epsilon": epsilon,
        "cover": cover,
        "window": if cover { json!(window) } else { Value::Null },
        "rows": rows.iter().map(|(l, c)| json!({"length": l, "coverage": c})).collect::<Vec<_>>(),
    });
    Ok((Report::new(text, j), export::density_csv(&rows)))
}

fn records_csv(r: &DeviationRecords) -> String {
    let mut all: Vec<DeviationSample> = r.line.iter().chain(&r.origin).copied().collect();
    all.sort_by(|a, b| a.arclength.total_cmp(&b.arclength));
    all.dedup();
    export::deviation_csv(&all)
}

fn deviation(cli: &Cli, budget: &FieldElem, start: &Option<Point>, dir: &Option<Point>, shore: Option<Shore>, step: Option<f64>) -> Result<(Report, String), Error> {
    let (f1, f1_dir) = f1_start();
    let dir = dir.clone().unwrap_or(f1_dir);
    let cp = match start {
        Some(p) => CoverPoint::new(p.clone(), shore),
        None => f1,
    };
    let line = (cp.p.to_f64(), dir.to_f64());
    let (rec, csv) = match (cli.mode, step) {
        (Mode::Exact, _) => {
            let t = lift_trace::<FieldElem>(&cp, &dir, budget, 0.0)?;
            let rec = deviation_records_of(&t.segments, line.clone());
            let csv = match step {
                Some(h) => export::deviation_csv(&deviation_series(&t.segments, line, h)?.samples),
                None => records_csv(&rec),
            };
            (rec, csv)
        }
        (Mode::Float, Some(h)) => {
            let t = lift_trace::<f64>(&cp, &dir, budget, SNAP_TOL)?;
            let rec = deviation_records_of(&t.segments, line.clone());
            (rec, export::deviation_csv(&deviation_series(&t.segments, line, h)?.samples))
        }
        (Mode::Float, None) => {
            let rec = deviation_records(&cp.to_f64(), &dir.to_f64(), budget.to_f64(), line)?;
            let csv = records_csv(&rec);
            (rec, csv)
        }
    };
    let fit = rec.log_fit();
    let mut text = format!("{} record(s) over length {:.3}; max deviation {:.9}\n", rec.line.len(), rec.arclength, rec.max_line());
    for level in [1.0, 2.0] {
        match rec.first_exceeding(level) {
            Some(l) => text.push_str(&format!("  exceeds {level} at length {l}\n")),
            None => text.push_str(&format!("  never exceeds {level}\n")),
        }
    }
    if let Some(f) = fit {
        text.push_str(&format!("dist_origin ~ {:.6} ln(L) + {:.6}, R^2 = {:.6}\n", f.slope, f.intercept, f.r2));
    }
    let j = json!({
        "records": rec.line.len(),
        "arclength": rec.arclength,
        "max_deviation": rec.max_line(),
        "exceeds_1_at": rec.first_exceeding(1.0),
        "exceeds_2_at": rec.first_exceeding(2.0),
        "fit": fit.map(|f| json!({"slope": f.slope, "intercept": f.intercept, "r2": f.r2})),
    });
    Ok((Report::new(text, j), csv))
}

fn verify() -> Run {
    let a = Autos::new()?;
    let results = verify_autos(&a);
    let mut text = String::new();
    for c in &results {
        text.push_str(&format!("{}  {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail));
    }
    let ok = results.iter().all(|c| c.passed);
    let j = json!({
        "ok": ok,
        "checks": results.iter().map(|c| json!({"name": c.name, "passed": c.passed, "detail": c.detail})).collect::<Vec<_>>(),
    });
    Ok(Report { text, json: j, ok })
}

fn lemma4(k: usize, out: &Option<PathBuf>) -> Run {
    let a = Autos::new()?;
    let seq = lemma4_sequence(&a, k)?;
    write(out, &export::lemma4_csv(&seq))?;
    let ratio = if seq.len() > 1 { Some(seq[1].u.checked_div(&seq[0].u)?) } else { None };
    let mut text = String::from("k  u_k  |u_k|\n");
    for e in &seq {
        text.push_str(&format!("{}  {}  {:.6e}{}\n", e.k, e.u, e.u.to_f64().abs(), if e.matches() { "" } else { "  MISMATCH" }));
    }
    if let Some(r) = &ratio {
        text.push_str(&format!("ratio {r}\n"));
    }
    let ok = seq.iter().all(|e| e.matches());
    let j = json!({
        "ok": ok,
        "ratio": ratio.map(|r| r.to_string()),
        "rows": seq.iter().map(|e| json!({"k": e.k, "u": e.u.to_string(), "abs_u": e.u.to_f64().abs(), "expected": e.expected.to_string(), "point": pt(&e.point.p)})).collect::<Vec<_>>(),
    });
    Ok(Report { text, json: j, ok })
}

fn ray_report<S: Scalar>(t: &RayTrace<S>, start: &Vec2<S>, output: &Output) -> Run {
    let mut dirs: Vec<(f64, f64)> = t.directions.iter().map(|d| {
        let n = d.norm_sq().to_f64().sqrt();
        ((d.x.to_f64() / n * 1e9).round() / 1e9, (d.y.to_f64() / n * 1e9).round() / 1e9)
    }).collect();
    dirs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    dirs.dedup();
    let rec = deviation_records_of(&t.segments, (start.to_f64s(), t.directions[0].to_f64s()));
    let end = t.end();
    write(&output.svg, &plane_drawing(&t.segments, false).to_svg(800.0))?;
    let text = format!(
        "{} bounce(s), {:?}, {} distinct direction(s)\nend ({:.9}, {:.9}); max deviation {:.6}\n",
        t.bounces,
        t.termination,
        dirs.len(),
        end.x.to_f64(),
        end.y.to_f64(),
        rec.max_line()
    );
    let j = json!({
        "bounces": t.bounces,
        "termination": format!("{:?}", t.termination),
        "directions": dirs.len(),
        "end": fpt(end),
        "max_deviation": rec.max_line(),
    });
    Ok(Report::new(text, j))
}

#[allow(clippy::too_many_arguments)]
fn billiard(cli: &Cli, arm: &FieldElem, dir: &Point, budget: &FieldElem, start: &Point, orientation: Orientation, output: &Output) -> Run {
    match cli.mode {
        Mode::Exact => {
            let scene = build_cross_scene(arm.clone(), orientation)?;
            let t = trace_ray(&scene, start, dir, budget, 0.0)?;
            write(&output.out, &export::trace_csv(&export::planar(&t.segments)))?;
            ray_report(&t, start, output)
        }
        Mode::Float => {
            let scene = build_cross_scene(arm.to_f64(), orientation)?;
            let start = start.to_f64();
            let (time, _): (f64, bool) = budget_param(dir, budget);
            let fdir = dir.to_f64();
            let t = trace_ray(&scene, &start, &fdir, &(time * fdir.length()), SNAP_TOL)?;
            write(&output.out, &export::trace_csv_float(&export::planar(&t.segments)))?;
            ray_report(&t, &start, output)
        }
    }
}

fn run(cli: &Cli) -> Run {
    match &cli.cmd {
        Cmd::SurfaceInfo => surface_info(&load_surface(&cli.surface)?),
        Cmd::Cylinders { dir, budget } => cylinders(&load_surface(&cli.surface)?, dir, budget),
        Cmd::Connections { dir, budget } => connections(&load_surface(&cli.surface)?, dir, budget),
        Cmd::Trace { start, dir, budget, cover, shore, output } => trace(cli, start, dir, budget, *cover, *shore, output),
        Cmd::Density { epsilon, budget, cover, window, start, dir, shore, samples, out } => {
            let (r, csv) = density(cli, *epsilon, budget, *cover, *window, start, dir, *shore, *samples)?;
            write(out, &csv)?;
            Ok(r)
        }
        Cmd::Deviation { budget, start, dir, shore, step, out } => {
            let (r, csv) = deviation(cli, budget, start, dir, *shore, *step)?;
            write(out, &csv)?;
            Ok(r)
        }
        Cmd::VerifyAutos => verify(),
        Cmd::Lemma4 { k, out } => lemma4(*k, out),
        Cmd::Billiard { arm, dir, budget, start, orientation, output } => billiard(cli, arm, dir, budget, start, *orientation, output),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(r) => {
            let body = if cli.json { serde_json::to_string_pretty(&r.json).expect("json") + "\n" } else { r.text };
            // A closed pipe is not a failure of the computation.
            let _ = std::io::stdout().lock().write_all(body.as_bytes());
            if r.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

mod input;
mod report;
mod suites;
mod svg;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use clustermirror::affine_base::StripData;
use clustermirror::filtered::{boundary_depth, max_torsion};
use clustermirror::glued_mirror::{
    boundary_edges, global_section, glue_sections, hartogs_extend, monodromy_transport, pa_small_cover,
    CoverElement, GlobalFunction,
};
use clustermirror::local_mirror::{polygon_pa, wall_cross_inverse, wall_cross_series, WallCrossSpec, WallSide};
use clustermirror::rational::{fmt_q, q};
use clustermirror::{EigenrayDiagram, LatticeSeries};

use input::{InputError, Overlay};
use report::{digest, RunReport, Status};
use suites::{rect, xi_eta, SuiteArgs};

#[derive(Parser, Debug)]
#[command(name = "clustermirror", version, about = "Exact checks on eigenray diagrams, their mirrors and filtered complexes")]
struct Cli {
    /// Seed for sampling suites; recorded in the report.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the output here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
    Svg,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Eigenray diagrams: validation, rendering and moves.
    #[command(subcommand)]
    Diagram(DiagramCmd),
    /// Lattice series over polygons.
    #[command(subcommand)]
    Series(SeriesCmd),
    /// The glued mirror of the local model B_k.
    #[command(subcommand)]
    Mirror(MirrorCmd),
    /// Filtered cochain complexes.
    #[command(subcommand)]
    Complex(ComplexCmd),
    /// Runs an invariant suite.
    Check(CheckArgs),
}

#[derive(Subcommand, Debug)]
enum DiagramCmd {
    /// Structural checks: primitive directions, node order, disjoint rays
    Validate {
        file: PathBuf,
    },
    /// SVG of rays, nodes and optional strips or overlays
    Render {
        file: PathBuf,
        /// Polygon overlay, e.g. `Pa:k=1,a=1`. Repeatable.
        #[arg(long)]
        overlay: Vec<String>,
        /// Draw the automatic strips and node segments.
        #[arg(long)]
        strips: bool,
    },
    /// Moves a node along its ray; prints the new diagram.
    Slide {
        file: PathBuf,
        #[arg(long)]
        ray: usize,
        #[arg(long)]
        node: usize,
        #[arg(long)]
        offset: String,
    },
    /// Re-cuts a ray along the opposite half of its eigenline; prints the new diagram.
    BranchMove {
        file: PathBuf,
        #[arg(long)]
        ray: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SideArg {
    Upper,
    Lower,
}

#[derive(Subcommand, Debug)]
enum SeriesCmd {
    /// Valuation on the reference polygon or on `--polygon`.
    Val {
        file: PathBuf,
        /// Vertices `x,y;x,y;...`.
        #[arg(long)]
        polygon: Option<String>,
        /// Reference polygon for text files without `[ref ...]`.
        #[arg(long)]
        reference: Option<String>,
    },
    /// Restricts a series to a smaller `--polygon`
    Restrict {
        file: PathBuf,
        #[arg(long)]
        polygon: String,
        #[arg(long)]
        reference: Option<String>,
    },
    /// Wall crossing of B_k from the + chart to the − chart (or back with `--inverse`).
    Wallcross {
        file: PathBuf,
        #[arg(long, default_value_t = 1)]
        k: u32,
        #[arg(long, value_enum, default_value_t = SideArg::Upper)]
        side: SideArg,
        #[arg(long, default_value = "8")]
        cutoff: String,
        #[arg(long)]
        inverse: bool,
        #[arg(long)]
        reference: Option<String>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FunctionArg {
    X,
    Y,
    U,
}

impl FunctionArg {
    fn global(self) -> GlobalFunction {
        match self {
            FunctionArg::X => GlobalFunction::X,
            FunctionArg::Y => GlobalFunction::Y,
            FunctionArg::U => GlobalFunction::U,
        }
    }
}

#[derive(Subcommand, Debug)]
enum MirrorCmd {
    /// Glues a global function over the small cover of P(a).
    Glue {
        #[arg(long, default_value_t = 1)]
        k: u32,
        #[arg(long, default_value = "2")]
        a: String,
        #[arg(long, value_enum, default_value_t = FunctionArg::X)]
        function: FunctionArg,
        #[arg(long, default_value = "8")]
        cutoff: String,
    },
    /// Transports a series around the node of B_k.
    Monodromy {
        #[arg(long, default_value_t = 1)]
        k: u32,
        #[arg(long, default_value = "8")]
        cutoff: String,
        /// Series on a polygon above the wall; defaults to ξ on [-1,1]×[1,2].
        #[arg(long)]
        series: Option<PathBuf>,
        #[arg(long)]
        reference: Option<String>,
    },
    /// Extends a global function from the boundary of P(a).
    Hartogs {
        #[arg(long, default_value_t = 1)]
        k: u32,
        #[arg(long, default_value = "1")]
        a: String,
        #[arg(long, value_enum, default_value_t = FunctionArg::U)]
        function: FunctionArg,
        #[arg(long, default_value = "8")]
        cutoff: String,
    },
    /// Sampled cocycle, independence and separation checks inside P(a).
    Cocycle {
        #[arg(long, default_value_t = 1)]
        k: u32,
        #[arg(long, default_value = "2")]
        a: String,
        #[arg(long, default_value_t = 5)]
        instances: usize,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
}

#[derive(Subcommand, Debug)]
enum ComplexCmd {
    /// Maximal torsion of each cohomology group
    Torsion {
        file: PathBuf,
        #[arg(long)]
        degree: Option<i64>,
    },
    /// Boundary depth over the Novikov field
    BoundaryDepth {
        file: PathBuf,
        #[arg(long)]
        degree: Option<i64>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Suite {
    Wallcross,
    Monodromy,
    Hartogs,
    Cocycle,
    Torsion,
    Bv,
    Tropdiag,
}

#[derive(clap::Args, Debug)]
struct CheckArgs {
    #[arg(value_enum)]
    suite: Suite,
    #[arg(long, default_value_t = 1)]
    k: u32,
    #[arg(long, default_value = "8")]
    cutoff: String,
    /// Polygon size parameter for P(a).
    #[arg(long)]
    a: Option<String>,
    /// Number of random instances (complexes, configurations or polyvectors).
    #[arg(long)]
    instances: Option<usize>,
    /// Samples per instance or per chart.
    #[arg(long)]
    samples: Option<usize>,
}

enum Output {
    Report(RunReport),
    /// A document with its natural format (diagram JSON or SVG).
    Document(String, Format),
}

fn args_digest(command: &str, args: &[(&str, String)], files: &[&[u8]]) -> String {
    let canon: String = args.iter().map(|(k, v)| format!("{k}={v};")).collect();
    let mut parts: Vec<&[u8]> = vec![command.as_bytes(), canon.as_bytes()];
    parts.extend_from_slice(files);
    digest(&parts)
}

fn default_ref(reference: &Option<String>) -> Result<Option<clustermirror::RationalPolygon>, InputError> {
    reference.as_deref().map(input::polygon).transpose()
}

fn run_diagram(cmd: &DiagramCmd) -> Result<Output, InputError> {
    match cmd {
        DiagramCmd::Validate { file } => {
            let d = input::diagram_unchecked(file)?;
            let mut r = RunReport::new("diagram validate", args_digest("diagram validate", &[], &[&d.bytes]), None);
            match d.value.validate() {
                Ok(()) => {
                    let nodes = d.value.nodes();
                    let mult: u32 = nodes.iter().map(|n| n.2).sum();
                    r.push("valid", Status::Pass, format!("{} rays, {} nodes, total multiplicity {mult}", d.value.rays.len(), nodes.len()));
                }
                Err(clustermirror::affine_base::AffineError::Invalid(issues)) => {
                    for i in issues {
                        r.push("valid", Status::Fail, i.to_string());
                    }
                }
                Err(e) => r.push("valid", Status::Fail, e.to_string()),
            }
            Ok(Output::Report(r))
        }
        DiagramCmd::Render { file, overlay, strips } => {
            let d = input::diagram(file)?;
            let mut layers = Vec::new();
            for o in overlay {
                match input::overlay(o)? {
                    Overlay::Pa { k, a } => {
                        let bk = EigenrayDiagram::b_k(k);
                        let p = polygon_pa(k, &a).map_err(|e| InputError::Argument(e.to_string()))?;
                        let label = format!("P({}) in B_{k}", fmt_q(&a));
                        layers.push(svg::Layer::from_nodal("overlay", label, &p, &bk).map_err(InputError::Argument)?);
                    }
                }
            }
            let st = if *strips {
                Some(StripData::auto(&d.value).map_err(|e| InputError::Argument(e.to_string()))?)
            } else {
                None
            };
            Ok(Output::Document(svg::render(&d.value, st.as_ref(), &layers), Format::Svg))
        }
        DiagramCmd::Slide { file, ray, node, offset } => {
            let d = input::diagram(file)?;
            let moved = d
                .value
                .nodal_slide(*ray, *node, input::rational(offset)?)
                .map_err(|e| InputError::Argument(e.to_string()))?;
            Ok(Output::Document(moved.to_json() + "\n", Format::Json))
        }
        DiagramCmd::BranchMove { file, ray } => {
            let d = input::diagram(file)?;
            let moved = d.value.branch_move(*ray).map_err(|e| InputError::Argument(e.to_string()))?;
            Ok(Output::Document(moved.to_json() + "\n", Format::Json))
        }
    }
}

fn run_series(cmd: &SeriesCmd) -> Result<Output, InputError> {
    let arg = |e: &dyn std::fmt::Display| InputError::Argument(e.to_string());
    match cmd {
        SeriesCmd::Val { file, polygon, reference } => {
            let f = input::series(file, default_ref(reference)?.as_ref())?;
            let args = [("polygon", polygon.clone().unwrap_or_default())];
            let mut r = RunReport::new("series val", args_digest("series val", &args, &[&f.bytes]), None);
            let v = match polygon {
                Some(p) => f.value.val_on_polygon(&input::polygon(p)?).map_err(|e| arg(&e))?,
                None => f.value.val(),
            };
            r.info("valuation", v.to_string());
            Ok(Output::Report(r))
        }
        SeriesCmd::Restrict { file, polygon, reference } => {
            let f = input::series(file, default_ref(reference)?.as_ref())?;
            let args = [("polygon", polygon.clone())];
            let mut r = RunReport::new("series restrict", args_digest("series restrict", &args, &[&f.bytes]), None);
            let g = f.value.restrict(&input::polygon(polygon)?).map_err(|e| arg(&e))?;
            r.info("restriction", g.to_string());
            Ok(Output::Report(r))
        }
        SeriesCmd::Wallcross { file, k, side, cutoff, inverse, reference } => {
            let f = input::series(file, default_ref(reference)?.as_ref())?;
            let cut = input::rational(cutoff)?;
            let side = match side {
                SideArg::Upper => WallSide::Upper,
                SideArg::Lower => WallSide::Lower,
            };
            let args = [("k", k.to_string()), ("side", format!("{side:?}")), ("cutoff", fmt_q(&cut)), ("inverse", inverse.to_string())];
            let mut r = RunReport::new("series wallcross", args_digest("series wallcross", &args, &[&f.bytes]), None);
            let g = if *inverse {
                wall_cross_inverse(*k, side, &f.value, &cut)
            } else {
                let spec = WallCrossSpec { k: *k, side, cutoff: cut.clone(), polygon: f.value.reference().clone() };
                wall_cross_series(&spec, &f.value)
            };
            match g {
                Ok(g) => {
                    r.info("image", g.to_string());
                    r.info("image in chart coordinates", xi_eta(&g));
                }
                Err(e) => r.push("image", Status::Fail, e.to_string()),
            }
            Ok(Output::Report(r))
        }
    }
}

fn run_mirror(cmd: &MirrorCmd, seed: Option<u64>) -> Result<Output, InputError> {
    let arg = |e: &dyn std::fmt::Display| InputError::Argument(e.to_string());
    match cmd {
        MirrorCmd::Glue { k, a, function, cutoff } => {
            let (a, cut) = (input::rational(a)?, input::rational(cutoff)?);
            let args = [("k", k.to_string()), ("a", fmt_q(&a)), ("function", format!("{function:?}")), ("cutoff", fmt_q(&cut))];
            let mut r = RunReport::new("mirror glue", args_digest("mirror glue", &args, &[]), None);
            let d = EigenrayDiagram::b_k(*k);
            let cover = pa_small_cover(*k, &a).map_err(|e| arg(&e))?;
            let mut elements = Vec::new();
            for (i, c) in cover.iter().enumerate() {
                let chart = suites::local_chart(c, &d).map_err(|e| arg(&e))?;
                r.info(format!("cover element {i}"), format!("{c} in chart {chart}"));
                elements.push(global_section(function.global(), c.clone(), chart, &d).map_err(|e| arg(&e))?);
            }
            match glue_sections(&elements, &d, &cut) {
                Ok(g) => {
                    for c in &g.certificates {
                        r.push(
                            format!("overlap {}–{} piece {}", c.first, c.second, c.piece),
                            Status::Pass,
                            format!("{} terms agree below T^{} in chart {}", c.verified_terms, fmt_q(&c.cutoff), c.chart),
                        );
                    }
                }
                Err(e) => r.push("gluing", Status::Fail, e.to_string()),
            }
            Ok(Output::Report(r))
        }
        MirrorCmd::Monodromy { k, cutoff, series, reference } => {
            let cut = input::rational(cutoff)?;
            let (f, bytes) = match series {
                Some(p) => {
                    let l = input::series(p, default_ref(reference)?.as_ref())?;
                    (l.value, l.bytes)
                }
                None => (LatticeSeries::x(rect([-1, 1], [1, 2]), &[1, 0]), Vec::new()),
            };
            let args = [("k", k.to_string()), ("cutoff", fmt_q(&cut))];
            let mut r = RunReport::new("mirror monodromy", args_digest("mirror monodromy", &args, &[&bytes]), None);
            match monodromy_transport(*k, &f, &cut) {
                Ok(rep) => {
                    for s in &rep.steps {
                        r.info(format!("step {}", s.name), xi_eta(&s.series));
                    }
                    r.info("transported", xi_eta(&rep.raw));
                    let m = rep.lattice_map;
                    r.info("lattice monodromy", format!("[[{}, {}], [{}, {}]]", m[0][0], m[0][1], m[1][0], m[1][1]));
                    let status = if rep.closes { Status::Pass } else { Status::Fail };
                    r.push("loop closes up to lattice monodromy", status, xi_eta(&rep.closed));
                }
                Err(e) => r.push("loop", Status::Fail, e.to_string()),
            }
            Ok(Output::Report(r))
        }
        MirrorCmd::Hartogs { k, a, function, cutoff } => {
            let (a, cut) = (input::rational(a)?, input::rational(cutoff)?);
            let args = [("k", k.to_string()), ("a", fmt_q(&a)), ("function", format!("{function:?}")), ("cutoff", fmt_q(&cut))];
            let mut r = RunReport::new("mirror hartogs", args_digest("mirror hartogs", &args, &[]), None);
            let d = EigenrayDiagram::b_k(*k);
            let p = polygon_pa(*k, &a).map_err(|e| arg(&e))?;
            let edges = boundary_edges(&p, &d).map_err(|e| arg(&e))?;
            let data: Vec<CoverElement> = edges
                .iter()
                .map(|(e, c)| global_section(function.global(), e.clone(), *c, &d))
                .collect::<Result<_, _>>()
                .map_err(|e| arg(&e))?;
            for (i, e) in data.iter().enumerate() {
                r.info(format!("edge {i}"), format!("{} in chart {}: {}", e.polygon, e.chart, xi_eta(&e.series)));
            }
            match hartogs_extend(&data, &p, &d, &cut) {
                Ok(g) => {
                    let el = &g.cover[0];
                    r.push("extension", Status::Pass, format!("{} in chart {}", xi_eta(&el.series), el.chart));
                }
                Err(e) => r.push("extension", Status::Fail, e.to_string()),
            }
            Ok(Output::Report(r))
        }
        MirrorCmd::Cocycle { k, a, instances, samples } => {
            let a = input::rational(a)?;
            let seed = seed.unwrap_or(0);
            let args = [("k", k.to_string()), ("a", fmt_q(&a)), ("instances", instances.to_string()), ("samples", samples.to_string())];
            let mut r = RunReport::new("mirror cocycle", args_digest("mirror cocycle", &args, &[]), Some(seed));
            let sa = SuiteArgs { k: *k, cutoff: q(8), seed, instances: *instances, samples: *samples, a };
            for (name, o) in suites::cocycle(&sa) {
                r.check(name, o);
            }
            Ok(Output::Report(r))
        }
    }
}

fn run_complex(cmd: &ComplexCmd) -> Result<Output, InputError> {
    let (name, file, degree) = match cmd {
        ComplexCmd::Torsion { file, degree } => ("complex torsion", file, degree),
        ComplexCmd::BoundaryDepth { file, degree } => ("complex boundary-depth", file, degree),
    };
    let c = input::complex(file)?;
    let args = [("degree", degree.map(|d| d.to_string()).unwrap_or_default())];
    let mut r = RunReport::new(name, args_digest(name, &args, &[&c.bytes]), None);
    let degrees: Vec<i64> = match degree {
        Some(d) => vec![*d],
        None => {
            let lo = c.value.ranks.keys().next().copied().unwrap_or(0);
            let hi = c.value.ranks.keys().last().copied().unwrap_or(0);
            (lo..=hi).collect()
        }
    };
    for i in degrees {
        let v = match cmd {
            ComplexCmd::Torsion { .. } => max_torsion(&c.value, i),
            ComplexCmd::BoundaryDepth { .. } => boundary_depth(&c.value, i),
        };
        match v {
            Ok(v) => r.info(format!("degree {i}"), v.to_string()),
            Err(e) => r.push(format!("degree {i}"), Status::Fail, e.to_string()),
        }
    }
    Ok(Output::Report(r))
}

fn run_check(c: &CheckArgs, seed: Option<u64>) -> Result<Output, InputError> {
    let seed = seed.unwrap_or(0);
    let (instances, samples, a) = match c.suite {
        Suite::Torsion => (100, 0, "2"),
        Suite::Cocycle => (5, 100, "2"),
        Suite::Bv => (200, 0, "2"),
        Suite::Tropdiag => (0, 500, "2"),
        Suite::Hartogs => (0, 0, "1"),
        Suite::Wallcross | Suite::Monodromy => (0, 0, "2"),
    };
    let sa = SuiteArgs {
        k: c.k,
        cutoff: input::rational(&c.cutoff)?,
        seed,
        instances: c.instances.unwrap_or(instances),
        samples: c.samples.unwrap_or(samples),
        a: input::rational(c.a.as_deref().unwrap_or(a))?,
    };
    if sa.k == 0 {
        return Err(InputError::Argument("--k must be positive".into()));
    }
    let suite = format!("{:?}", c.suite).to_lowercase();
    let command = format!("check {suite}");
    let args = [
        ("k", sa.k.to_string()),
        ("cutoff", fmt_q(&sa.cutoff)),
        ("a", fmt_q(&sa.a)),
        ("instances", sa.instances.to_string()),
        ("samples", sa.samples.to_string()),
    ];
    let uses_seed = matches!(c.suite, Suite::Torsion | Suite::Cocycle | Suite::Bv | Suite::Tropdiag);
    let mut r = RunReport::new(&command, args_digest(&command, &args, &[]), uses_seed.then_some(seed));
    let checks = match c.suite {
        Suite::Wallcross => suites::wallcross(&sa),
        Suite::Monodromy => suites::monodromy(&sa),
        Suite::Hartogs => suites::hartogs(&sa),
        Suite::Cocycle => suites::cocycle(&sa),
        Suite::Torsion => suites::torsion(&sa),
        Suite::Bv => suites::bv(&sa),
        Suite::Tropdiag => suites::tropdiag(&sa),
    };
    for (name, o) in checks {
        r.check(name, o);
    }
    Ok(Output::Report(r))
}

fn write_out(out: Option<&Path>, text: &str) -> std::io::Result<()> {
    match out {
        Some(p) => fs::write(p, text),
        None => std::io::stdout().write_all(text.as_bytes()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Diagram(c) => run_diagram(c),
        Command::Series(c) => run_series(c),
        Command::Mirror(c) => run_mirror(c, cli.seed),
        Command::Complex(c) => run_complex(c),
        Command::Check(c) => run_check(c, cli.seed),
    };
    let (text, code) = match result {
        Ok(Output::Report(r)) => {
            let text = match cli.format.unwrap_or(Format::Text) {
                Format::Json => r.to_json(),
                Format::Text => r.to_text(),
                Format::Svg => {
                    eprintln!("error: reports have no SVG form; use --format json or text");
                    return ExitCode::from(2);
                }
            };
            (text, if r.passed() { 0 } else { 1 })
        }
        Ok(Output::Document(doc, natural)) => {
            if cli.format.is_some_and(|f| f != natural && !(natural == Format::Json && f == Format::Text)) {
                let name = natural.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
                eprintln!("error: this command writes {name} only");
                return ExitCode::from(2);
            }
            (doc, 0)
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = write_out(cli.out.as_deref(), &text) {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(2);
    }
    ExitCode::from(code)
}

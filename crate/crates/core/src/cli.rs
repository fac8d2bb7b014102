//! Command-line front end.
//!
//! Every command produces a JSON report (the default) or a plain-text
//! rendering of it. Exit codes: 0 success, 1 invalid input, 2 resource cap,
//! 3 verification failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::automorphism::{Element, MachineSpec, DEFAULT_MAX_STATES};
use crate::closure::{
    contraction_depth, nucleus, pattern_closure, quotient_generators, verify_branching, verify_closure,
    BranchPresentation, ClosureOptions, WitnessSelection,
};
use crate::constrained::{find_violation, truncation_set, viable_patterns, ConstraintSystem, Declared};
use crate::families::{self, Family, WordFamily};
use crate::pattern::{essential_patterns, is_pattern_group, is_transitive, pattern_at, Pattern};
use crate::permgroup::{Budget, LeafPerm, PermGroup, DEFAULT_CAP_ELEMENTS};
use crate::tree::Vertex;
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RESOURCE: i32 = 2;
pub const EXIT_VERIFICATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "treegrp", version, about = "Finite-state tree automorphisms and forbidden-pattern groups")]
pub struct Cli {
    #[command(flatten)]
    pub input: Input,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Input {
    /// Built-in family: odometer:k=K,s=S, gB, gR, trivial3 or grigorchuk.
    #[arg(long, global = true, conflicts_with = "group")]
    pub family: Option<String>,
    /// Machine JSON file; its named generators generate K.
    #[arg(long, global = true, value_name = "MACHINE_JSON")]
    pub group: Option<PathBuf>,
    /// Constraint system JSON file, overriding the family constraints.
    #[arg(long, global = true, value_name = "FILE")]
    pub constraints: Option<PathBuf>,
    /// Pattern size s + 1.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub size: Option<u64>,
    /// Cap on enumerated group elements.
    #[arg(long, global = true, env = "TREEGRP_CAP_ELEMENTS", default_value_t = DEFAULT_CAP_ELEMENTS as u64,
          value_parser = clap::value_parser!(u64).range(1..))]
    pub cap_elements: u64,
    /// Cap on product states explored by equality tests.
    #[arg(long, global = true, default_value_t = DEFAULT_MAX_STATES as u64,
          value_parser = clap::value_parser!(u64).range(1..))]
    pub cap_states: u64,
    /// Iteration cap for the nucleus computation.
    #[arg(long, global = true, default_value_t = 64, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_iter: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
    Dot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Witness {
    Covering,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExportObject {
    Machine,
    Constraints,
    Presentation,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Essential patterns of the given size.
    Patterns {
        /// Include every pattern in the report.
        #[arg(long)]
        list: bool,
    },
    /// Pattern closure, verified at every depth up to --depth.
    Closure {
        #[arg(long, visible_alias = "level", default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
        depth: u64,
        /// Add the nucleus to the witness set.
        #[arg(long)]
        contracting: bool,
        /// Restrict the deltas to the spine 0^j.
        #[arg(long)]
        spine: bool,
        #[arg(long, value_enum, default_value_t = Witness::Covering)]
        witness: Witness,
        /// Random branching samples at the top depth.
        #[arg(long, default_value_t = 16)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the presentation JSON here.
        #[arg(long)]
        presentation_out: Option<PathBuf>,
    },
    /// Verify a saved presentation against the constraints.
    Verify {
        #[arg(long, value_name = "FILE")]
        presentation: PathBuf,
        #[arg(long, visible_alias = "level", default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
        depth: u64,
    },
    /// Order, generator bounds and abelianization of the level-n quotient.
    Quotient {
        #[arg(long, visible_alias = "depth", value_parser = clap::value_parser!(u64).range(1..))]
        level: u64,
        #[arg(long)]
        contracting: bool,
    },
    /// Whether an element lies in the constrained group.
    Membership {
        /// Word in the machine generators, e.g. `t*a^-1`.
        #[arg(long)]
        element: String,
    },
    /// Nucleus of the group generated by K.
    Nucleus,
    /// Whether the constraints define a group, and the viable patterns.
    CheckGroup,
    /// Dump the machine, constraints or presentation.
    Export {
        #[arg(long, value_enum, default_value_t = ExportObject::Machine)]
        object: ExportObject,
        #[arg(long)]
        contracting: bool,
    },
}

/// A finished command: the report, and whether its verification succeeded.
#[derive(Debug)]
pub struct Report {
    pub value: Value,
    pub verified: bool,
    raw: Option<String>,
}

impl Report {
    fn new(value: Value) -> Report {
        Report { value, verified: true, raw: None }
    }

    fn raw(text: String) -> Report {
        Report { value: Value::Null, verified: true, raw: Some(text) }
    }

    pub fn render(&self, format: Format) -> String {
        if let Some(raw) = &self.raw {
            return raw.clone();
        }
        match format {
            Format::Text => {
                let mut value = self.value.clone();
                // the presentation dump is only useful as JSON
                if let Value::Object(map) = &mut value {
                    map.remove("presentation");
                }
                let mut out = String::new();
                render_text(&mut out, &value, 0);
                out
            }
            _ => format!("{}\n", serde_json::to_string_pretty(&self.value).expect("reports serialize")),
        }
    }
}

fn render_text(out: &mut String, v: &Value, indent: usize) {
    let pad = "  ".repeat(indent);
    match v {
        Value::Object(map) => {
            for (key, val) in map {
                let key = key.replace('_', " ");
                match val {
                    Value::Object(_) => {
                        let _ = writeln!(out, "{pad}{key}:");
                        render_text(out, val, indent + 1);
                    }
                    Value::Array(items) if items.iter().any(|x| x.is_object() || x.is_array()) => {
                        let _ = writeln!(out, "{pad}{key}:");
                        for item in items {
                            let _ = writeln!(out, "{pad}  -");
                            render_text(out, item, indent + 2);
                        }
                    }
                    _ => {
                        let _ = writeln!(out, "{pad}{key}: {}", scalar(val));
                    }
                }
            }
        }
        other => {
            let _ = writeln!(out, "{pad}{}", scalar(other));
        }
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "none".into(),
        Value::Array(items) => items.iter().map(scalar).collect::<Vec<_>>().join(", "),
        other => other.to_string(),
    }
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let code = if e.is_resource() { EXIT_RESOURCE } else { EXIT_INVALID };
        Failure { code, message: e.to_string() }
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_INVALID, message: message.into() }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// The group and constraints a command works on.
struct Subject {
    name: String,
    family: Option<Family>,
    machine: Arc<MachineSpec>,
    generators: Vec<Element>,
    size: usize,
    constraints: Option<ConstraintSystem>,
}

fn read(path: &PathBuf) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

impl Input {
    fn budget(&self) -> Budget {
        Budget::new(self.cap_elements as usize)
    }

    fn subject(&self) -> CliResult<Subject> {
        let constraints = self
            .constraints
            .as_ref()
            .map(|p| ConstraintSystem::from_json(&read(p)?).map_err(Failure::from))
            .transpose()?;
        let mut subject = match (&self.family, &self.group) {
            (Some(name), None) => {
                let f = families::family(name)?;
                Subject {
                    name: f.name.clone(),
                    machine: f.machine.clone(),
                    generators: f.generators.clone(),
                    size: f.size,
                    constraints: Some(f.constraints.clone()),
                    family: Some(f),
                }
            }
            (None, Some(path)) => {
                let machine = Arc::new(MachineSpec::from_json(&read(path)?)?);
                let generators = machine
                    .generators()
                    .keys()
                    .map(|n| Element::generator(&machine, n))
                    .collect::<crate::Result<Vec<_>>>()?;
                if generators.is_empty() {
                    return Err(invalid("machine has no named generators"));
                }
                let size = constraints.as_ref().map(ConstraintSystem::size).or(self.size.map(|s| s as usize));
                let size = size.ok_or_else(|| invalid("--size is required with --group"))?;
                Subject {
                    name: path.display().to_string(),
                    family: None,
                    machine,
                    generators,
                    size,
                    constraints: None,
                }
            }
            (None, None) if constraints.is_some() => {
                let c = constraints.clone().unwrap();
                let machine = families::odometer(c.alphabet());
                Subject {
                    name: "constraints".into(),
                    family: None,
                    generators: Vec::new(),
                    machine,
                    size: c.size(),
                    constraints: None,
                }
            }
            _ => return Err(invalid("one of --family or --group is required")),
        };
        if let Some(s) = self.size {
            subject.size = s as usize;
        }
        if constraints.is_some() {
            subject.constraints = constraints;
        }
        Ok(subject)
    }

    fn options(&self, contracting: bool) -> ClosureOptions {
        ClosureOptions {
            contracting,
            cap_elements: self.cap_elements as usize,
            max_states: self.cap_states as usize,
            nucleus_max_iter: self.max_iter as usize,
            ..ClosureOptions::default()
        }
    }
}

impl Subject {
    fn needs_generators(&self) -> CliResult<()> {
        if self.generators.is_empty() {
            return Err(invalid("this command needs --family or --group"));
        }
        Ok(())
    }

    /// The constraints, defaulting to the essential patterns of K.
    fn constraints(&self, input: &Input) -> CliResult<ConstraintSystem> {
        if let Some(c) = &self.constraints {
            return Ok(c.clone());
        }
        let ess = essential_patterns(&self.generators, self.size, input.cap_elements as usize)?;
        Ok(ConstraintSystem::from_allowed(ess.set)?)
    }

    /// Generating candidates for the level-`n` quotient of the tower families.
    fn candidates(&self, n: usize) -> Option<Vec<Element>> {
        let f = self.family.as_ref()?;
        let words = if f.name == "gB" {
            WordFamily::gb(n).ok()?
        } else if f.name == "gR" || f.name.starts_with("odometer:") {
            WordFamily::odometer(f.alphabet(), f.size - 1, n).ok()?
        } else {
            return None;
        };
        Some(words.generator_elements())
    }
}

fn pattern_json(p: &Pattern) -> Value {
    serde_json::to_value(p).expect("patterns serialize")
}

fn element_json(e: &Element) -> Value {
    json!(e.to_string())
}

fn presentation_value(pres: &BranchPresentation) -> Value {
    serde_json::from_str(&pres.to_json()).expect("presentation JSON is valid")
}

fn cmd_patterns(input: &Input, list: bool) -> CliResult<Report> {
    let subject = input.subject()?;
    subject.needs_generators()?;
    let ess = essential_patterns(&subject.generators, subject.size, input.cap_elements as usize)?;
    let mut report = Map::new();
    report.insert("source".into(), json!(subject.name));
    report.insert("k".into(), json!(ess.set.alphabet().size()));
    report.insert("size".into(), json!(subject.size));
    report.insert("essential_patterns".into(), json!(ess.set.len()));
    report.insert("group".into(), json!(is_pattern_group(&ess.set)));
    report.insert("transitive".into(), json!(is_transitive(&ess.set)));
    if list {
        let items: Vec<Value> = ess
            .witnesses
            .iter()
            .map(|(p, w)| {
                let mut item = Map::new();
                item.insert("pattern".into(), pattern_json(p));
                if let Some(label) = p.d4_label() {
                    item.insert("label".into(), json!(label));
                }
                item.insert("witness".into(), element_json(w));
                Value::Object(item)
            })
            .collect();
        report.insert("patterns".into(), Value::Array(items));
    }
    Ok(Report::new(Value::Object(report)))
}

fn closure_reports(
    pres: &BranchPresentation,
    c: &ConstraintSystem,
    depth: usize,
    cap: usize,
) -> CliResult<(Vec<Value>, bool)> {
    let mut rows = Vec::new();
    let mut all = true;
    for n in 1..=depth {
        let rep = verify_closure(pres, c, n, cap)?;
        all &= rep.equal;
        rows.push(serde_json::to_value(&rep).expect("reports serialize"));
    }
    Ok((rows, all))
}

#[allow(clippy::too_many_arguments)]
fn cmd_closure(
    input: &Input,
    depth: usize,
    contracting: bool,
    spine: bool,
    witness: Witness,
    samples: usize,
    seed: u64,
    presentation_out: Option<&PathBuf>,
) -> CliResult<Report> {
    let subject = input.subject()?;
    subject.needs_generators()?;
    let cap = input.cap_elements as usize;
    let mut opts = input.options(contracting);
    opts.spine = spine;
    opts.witness = match witness {
        Witness::Covering => WitnessSelection::Covering,
        Witness::Greedy => WitnessSelection::Greedy,
    };
    let pres = pattern_closure(&subject.generators, subject.size, &opts)?;
    let c = subject.constraints(input)?;
    if c.alphabet() != pres.alphabet() {
        return Err(invalid("constraints and group use different alphabets"));
    }
    let (rows, closure_ok) = closure_reports(&pres, &c, depth, cap)?;
    let branching = verify_branching(&pres, depth, samples, seed, cap)?;
    let verified = closure_ok && branching.failures == 0;
    if let Some(path) = presentation_out {
        std::fs::write(path, pres.to_json()).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    }
    let mut report = Map::new();
    report.insert("source".into(), json!(subject.name));
    report.insert("size".into(), json!(subject.size));
    report.insert("level_s_stabilizer".into(), json!(pres.level));
    report.insert("verified".into(), json!(verified));
    report.insert("image_order".into(), rows.last().map(|r| r["image_order"].clone()).unwrap_or(Value::Null));
    report.insert("depths".into(), Value::Array(rows));
    report.insert("branching".into(), serde_json::to_value(&branching).expect("reports serialize"));
    report.insert("generators".into(), pres.generators.iter().map(element_json).collect());
    report.insert("section_closure".into(), pres.base.iter().map(element_json).collect());
    report.insert("stabilizer_generators".into(), pres.stab_gens.iter().map(element_json).collect());
    if let Some(nuc) = &pres.nucleus {
        report.insert("nucleus_size".into(), json!(nuc.len()));
        let mut depths = Vec::new();
        for g in &pres.base {
            depths.push(contraction_depth(g, nuc, 6, input.cap_states as usize)?);
        }
        report.insert("contraction_depths".into(), json!(depths));
    }
    report.insert("presentation".into(), presentation_value(&pres));
    Ok(Report { value: Value::Object(report), verified, raw: None })
}

fn cmd_verify(input: &Input, presentation: &PathBuf, depth: usize) -> CliResult<Report> {
    let pres = BranchPresentation::from_json(&read(presentation)?)?;
    let subject = input.subject()?;
    let c = match subject.constraints {
        Some(c) => c,
        None => ConstraintSystem::from_allowed(pres.essential.clone())?,
    };
    let (rows, verified) = closure_reports(&pres, &c, depth, input.cap_elements as usize)?;
    let report = json!({
        "presentation": presentation.display().to_string(),
        "verified": verified,
        "image_order": rows.last().map(|r| r["image_order"].clone()),
        "depths": rows,
    });
    Ok(Report { value: report, verified, raw: None })
}

fn cmd_quotient(input: &Input, level: usize, contracting: bool) -> CliResult<Report> {
    let subject = input.subject()?;
    subject.needs_generators()?;
    let budget = input.budget();
    let pres = pattern_closure(&subject.generators, subject.size, &input.options(contracting))?;
    let k = pres.alphabet();
    let group = PermGroup::from_patterns(k, level, &quotient_generators(&pres, level))?;
    let order = group.order(&budget)?;
    let candidates: Option<Vec<LeafPerm>> = subject.candidates(level).map(|els| {
        els.iter().map(|e| pattern_at(e, &Vertex::root(), level).leaf_permutation()).collect()
    });
    let (lower, upper) = group.min_generators_bounds(candidates.as_deref(), &budget)?;
    let ab = group.abelianization(&budget)?;
    let truncation = truncation_set(&subject.constraints(input)?, level, budget.cap).map(|t| t.len());
    let truncation = match truncation {
        Ok(n) => json!(n),
        Err(e) if e.is_resource() => Value::Null,
        Err(e) => return Err(e.into()),
    };
    let report = json!({
        "source": subject.name,
        "level": level,
        "order": order,
        "truncation_order": truncation,
        "d": [lower, upper],
        "d_lower": lower,
        "d_upper": upper,
        "abelianization": {
            "order": ab.order,
            "invariant_factors": ab.invariant_factors(),
            "elementary_divisors": ab.elementary_divisors,
        },
    });
    Ok(Report::new(report))
}

fn cmd_membership(input: &Input, element: &str) -> CliResult<Report> {
    let subject = input.subject()?;
    let g = Element::parse(&subject.machine, element)?;
    let c = subject.constraints(input)?;
    let violation = find_violation(&g, &c, input.cap_states as usize)?;
    let report = json!({
        "source": subject.name,
        "element": g.to_string(),
        "member": violation.is_none(),
        "violation": violation.as_ref().map(|v| json!({
            "vertex": v.to_string(),
            "pattern": pattern_json(&pattern_at(&g, v, c.size())),
        })),
    });
    Ok(Report::new(report))
}

fn cmd_nucleus(input: &Input) -> CliResult<Report> {
    let subject = input.subject()?;
    subject.needs_generators()?;
    let opts = input.options(true);
    let nuc = nucleus(&subject.generators, opts.nucleus_max_iter, opts.nucleus_cap, opts.max_states);
    let report = match nuc {
        Ok(n) => json!({
            "source": subject.name,
            "contracting": true,
            "nucleus_size": n.len(),
            "nucleus": n.iter().map(element_json).collect::<Vec<_>>(),
        }),
        Err(Error::PossiblyNonContracting(reason)) => {
            return Err(Failure { code: EXIT_RESOURCE, message: format!("possibly non-contracting: {reason}") })
        }
        Err(e) => return Err(e.into()),
    };
    Ok(Report::new(report))
}

fn cmd_check_group(input: &Input) -> CliResult<Report> {
    let subject = input.subject()?;
    let c = subject.constraints(input)?;
    let viable = viable_patterns(&c);
    let report = json!({
        "source": subject.name,
        "k": c.alphabet().size(),
        "size": c.size(),
        "declared": match c.declared() { Declared::Allowed => "allowed", Declared::Forbidden => "forbidden" },
        "allowed": c.allowed().len(),
        "group": crate::constrained::is_group(&c),
        "viable": viable.len(),
        "empty": viable.is_empty(),
    });
    Ok(Report::new(report))
}

fn cmd_export(input: &Input, object: ExportObject, contracting: bool) -> CliResult<Report> {
    let subject = input.subject()?;
    match (object, input.format) {
        (ExportObject::Machine, Format::Dot) => Ok(Report::raw(subject.machine.to_dot())),
        (ExportObject::Machine, _) => Ok(Report::raw(format!("{}\n", subject.machine.to_json()))),
        (_, Format::Dot) => Err(invalid("only machines export to dot")),
        (ExportObject::Constraints, _) => Ok(Report::raw(format!("{}\n", subject.constraints(input)?.to_json()))),
        (ExportObject::Presentation, _) => {
            subject.needs_generators()?;
            let pres = pattern_closure(&subject.generators, subject.size, &input.options(contracting))?;
            Ok(Report::raw(format!("{}\n", pres.to_json())))
        }
    }
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli) -> CliResult<Report> {
    let input = &cli.input;
    if input.format == Format::Dot && !matches!(cli.command, Command::Export { .. }) {
        return Err(invalid("--format dot is only available for export"));
    }
    match &cli.command {
        Command::Patterns { list } => cmd_patterns(input, *list),
        Command::Closure { depth, contracting, spine, witness, samples, seed, presentation_out } => cmd_closure(
            input,
            *depth as usize,
            *contracting,
            *spine,
            *witness,
            *samples,
            *seed,
            presentation_out.as_ref(),
        ),
        Command::Verify { presentation, depth } => cmd_verify(input, presentation, *depth as usize),
        Command::Quotient { level, contracting } => cmd_quotient(input, *level as usize, *contracting),
        Command::Membership { element } => cmd_membership(input, element),
        Command::Nucleus => cmd_nucleus(input),
        Command::CheckGroup => cmd_check_group(input),
        Command::Export { object, contracting } => cmd_export(input, *object, *contracting),
    }
}

/// Parses `args`, runs the command, writes the report and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(report) => {
            let text = report.render(cli.input.format);
            if let Some(path) = &cli.input.out {
                if let Err(e) = std::fs::write(path, &text) {
                    eprintln!("error: {}: {e}", path.display());
                    return EXIT_INVALID;
                }
            } else {
                print!("{text}");
            }
            if report.verified {
                EXIT_OK
            } else {
                eprintln!("verification failed");
                EXIT_VERIFICATION
            }
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use bianchi_core::forms::{self, HermitianForm};
use bianchi_core::quadring::QuadInt;
use bianchi_core::surfaces::{self, Certificate, Group, PicardVariant, SurfaceSpec};
use bianchi_core::{arith, classgroup, sieve, tables, Error};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use output::{Format, Report};

#[derive(Parser, Debug)]
#[command(name = "bianchi", version, about = "Totally geodesic surfaces in Bianchi orbifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, env = "BIANCHI_THREADS", global = true)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value = "text", global = true)]
    format: Format,
    /// Print wall-clock time to stderr.
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Scan squarefree d for an empty residue set.
    Sieve {
        #[arg(long)]
        max_d: u64,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Appendix CSV to compare against; mismatches exit with status 3.
        #[arg(long)]
        golden: Option<PathBuf>,
    },
    /// Certified surface family for one d.
    Surfaces {
        #[arg(long)]
        d: u64,
        #[arg(long, default_value_t = 20)]
        limit: usize,
        #[arg(long, default_value_t = 3)]
        height: u32,
    },
    /// Run every test on one form, given as `d:a:Bx:By:c` with doubled B coordinates.
    Check {
        form: String,
        /// gamma, principal:N, gamma0:N, picard:A:B or coset:R.
        #[arg(long, default_value = "gamma")]
        group: String,
        #[arg(long, default_value_t = 3)]
        height: u32,
    },
    /// Recompute the appendix tables and diff them against the transcription.
    Tables {
        /// Transcription to check instead of the shipped one.
        #[arg(long)]
        golden: Option<PathBuf>,
    },
    Classgroup {
        #[arg(long)]
        d: u64,
    },
    /// Residue set, weights and the exceptional verdict for one d.
    Dset {
        #[arg(long)]
        d: u64,
    },
    /// Circles of the Picard group.
    Picard {
        #[arg(long)]
        disc: i128,
        #[arg(long, default_value = "plain")]
        variant: String,
        #[arg(long, default_value_t = 2)]
        height: u32,
        /// Gaussian prime `A:B`; reports the image of the stabilizer sample modulo it.
        #[arg(long)]
        image_prime: Option<String>,
        /// Gaussian prime `A:B`; reports the verdict at that level.
        #[arg(long)]
        level: Option<String>,
    },
}

enum Failure {
    Usage(String),
    Golden(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Inconsistent(_) | Error::SearchExhausted(..) => Failure::Internal(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = std::result::Result<(Report, Option<Failure>), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let threads = cli
        .common
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
        .max(1);
    let result = run(&cli.command, threads).and_then(|(report, late)| {
        let mut stdout = std::io::stdout().lock();
        report.write(cli.common.format, &mut stdout)?;
        late.map_or(Ok(()), Err)
    });
    if cli.common.timing {
        eprintln!("elapsed: {:.3}s", start.elapsed().as_secs_f64());
    }
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Golden(m)) => {
            eprintln!("golden mismatch: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Internal(m)) => {
            eprintln!("internal inconsistency: {m}");
            ExitCode::from(4)
        }
    }
}

fn run(cmd: &Command, threads: usize) -> Outcome {
    match cmd {
        Command::Sieve { max_d, checkpoint, golden } => cmd_sieve(*max_d, threads, checkpoint.as_deref(), golden.as_deref()),
        Command::Surfaces { d, limit, height } => cmd_surfaces(*d, *limit, *height),
        Command::Check { form, group, height } => cmd_check(form, group, *height),
        Command::Tables { golden } => cmd_tables(golden.as_deref()),
        Command::Classgroup { d } => cmd_classgroup(*d),
        Command::Dset { d } => cmd_dset(*d),
        Command::Picard { disc, variant, height, image_prime, level } => {
            cmd_picard(*disc, variant, *height, image_prime.as_deref(), level.as_deref())
        }
    }
}

fn squarefree_d(d: u64) -> Result<i64, Failure> {
    if d == 0 || !arith::is_squarefree(d) {
        return Err(Failure::Usage(format!("d = {d} must be a positive squarefree integer")));
    }
    i64::try_from(d).map_err(|_| Failure::Usage(format!("d = {d} out of range")))
}

fn cmd_sieve(max_d: u64, threads: usize, checkpoint: Option<&std::path::Path>, golden: Option<&std::path::Path>) -> Outcome {
    if max_d == 0 {
        return Err(Failure::Usage("--max-d must be at least 1".into()));
    }
    let rep = sieve::scan_empty(max_d, threads, checkpoint)?;
    let mut late = None;
    let mut json = json!({
        "d_max": rep.d_max,
        "count": rep.empties.len(),
        "empties": rep.empties,
        "shards": rep.shards,
    });
    if let Some(path) = golden {
        let rows = tables::load_appendix(path)?;
        let expected: Vec<u64> = tables::list_members(&rows, tables::ListTag::E1)
            .union(&tables::list_members(&rows, tables::ListTag::E2))
            .copied()
            .filter(|&d| d <= max_d)
            .collect();
        let missing: Vec<u64> = expected.iter().filter(|d| !rep.empties.contains(d)).copied().collect();
        let extra: Vec<u64> = rep.empties.iter().filter(|d| !expected.contains(d)).copied().collect();
        let ok = missing.is_empty() && extra.is_empty();
        json["golden"] = json!({ "match": ok, "missing": missing, "extra": extra });
        if !ok {
            late = Some(Failure::Golden(format!("missing {missing:?}, extra {extra:?}")));
        }
    }
    let rows = rep.empties.iter().map(|d| vec![d.to_string()]).collect();
    Ok((Report::new(json, &["d"], rows), late))
}

fn record(cert: &Certificate, spec: &SurfaceSpec) -> Result<Value, Failure> {
    let mut v = serde_json::to_value(cert.record(spec)).map_err(|e| Failure::Internal(e.to_string()))?;
    let replayed = surfaces::replay_certificate(cert, spec)?;
    if !replayed {
        return Err(Failure::Internal(format!("{} certificate for {} fails replay", cert.kind(), spec.form.to_tuple())));
    }
    v["replayed"] = json!(replayed);
    Ok(v)
}

fn cmd_surfaces(d: u64, limit: usize, height: u32) -> Outcome {
    let di = squarefree_d(d)?;
    let specs = if d < 5 { Vec::new() } else { surfaces::thereis_family(di, limit)? };
    let mut items = Vec::new();
    let mut rows = Vec::new();
    for s in &specs {
        let surfaces::Construction::Thereis { r, m, c } = s.construction else { unreachable!() };
        let embedded = surfaces::certify_embedded(s)?;
        let search = surfaces::search_not_embedded(s, height)?;
        if matches!(embedded, Certificate::EmbeddedCongruence { .. }) && matches!(search, Certificate::NotEmbedded { .. }) {
            return Err(Failure::Internal(format!("{} has both a certificate and a witness", s.form.to_tuple())));
        }
        let closed = surfaces::is_closed(s)?;
        let orient = surfaces::orientability_search(s, height)?;
        let necessary = surfaces::dset_necessary(s)?;
        let bound = forms::discriminant_bound_check(&s.form)?;
        rows.push(vec![
            r.to_string(),
            m.to_string(),
            c.to_string(),
            s.form.to_tuple(),
            s.discriminant().to_string(),
            embedded.kind().into(),
            closed.kind().into(),
            search.kind().into(),
            orient.kind().into(),
            necessary.to_string(),
            bound.to_string(),
        ]);
        items.push(json!({
            "r": r, "m": m.to_string(), "c": c.to_string(),
            "form": s.form.to_tuple(),
            "discriminant": s.discriminant().to_string(),
            "embedded": record(&embedded, s)?,
            "closed": closed.kind(),
            "search": record(&search, s)?,
            "orientation": record(&orient, s)?,
            "dset_necessary": necessary,
            "discriminant_bound": bound,
        }));
    }
    let count = surfaces::distinct_count(&specs, 1)?;
    let mut json = json!({
        "d": d,
        "height": height,
        "surfaces": items,
        "distinct": { "lower": count.certified_lower, "merged": count.merged, "raw": count.raw },
    });
    if specs.is_empty() {
        let rows = tables::appendix()?;
        let note = if tables::list_members(&rows, tables::ListTag::E1).contains(&d) {
            "d in E1".to_string()
        } else if tables::list_members(&rows, tables::ListTag::E2).contains(&d) {
            "d in E2".to_string()
        } else {
            "no parameters in range".to_string()
        };
        json["note"] = json!(note);
    }
    let header = ["r", "m", "c", "form", "discriminant", "embedded", "closed", "search", "orientation", "dset_necessary", "discriminant_bound"];
    Ok((Report::new(json, &header, rows), None))
}

fn cmd_check(tuple: &str, group: &str, height: u32) -> Outcome {
    let form: HermitianForm = tuple.parse()?;
    let group = Group::parse(group, form.d)?;
    let construction = surfaces::recognize_canonical(&form).unwrap_or(surfaces::Construction::Raw);
    let spec = SurfaceSpec { form, group, construction };
    let disc = spec.discriminant();
    if disc <= 0 {
        return Err(Failure::Usage(format!("discriminant {disc} is not positive")));
    }
    let search = surfaces::search_not_embedded(&spec, height)?;
    let embedded = surfaces::certify_embedded(&spec)?;
    if matches!(embedded, Certificate::EmbeddedCongruence { .. }) && matches!(search, Certificate::NotEmbedded { .. }) {
        return Err(Failure::Internal("certificate and witness both produced".into()));
    }
    let closed = surfaces::is_closed(&spec)?;
    let necessary = match construction {
        surfaces::Construction::Raw => Value::String("n/a".into()),
        _ => json!(surfaces::dset_necessary(&spec)?),
    };
    let orientation = if form.a == 0 {
        Value::String("n/a".into())
    } else {
        record(&surfaces::orientability_search(&spec, height)?, &spec)?
    };
    let json = json!({
        "form": form.to_tuple(),
        "group": group.to_string(),
        "discriminant": disc.to_string(),
        "closed": closed.kind(),
        "search": record(&search, &spec)?,
        "embedded": record(&embedded, &spec)?,
        "dset_necessary": necessary,
        "discriminant_bound": forms::discriminant_bound_check(&form)?,
        "orientation": orientation,
    });
    Ok((Report::fields(json), None))
}

fn cmd_tables(golden: Option<&std::path::Path>) -> Outcome {
    let rows = match golden {
        Some(p) => tables::load_appendix(p)?,
        None => tables::appendix()?,
    };
    let rep = tables::check_tables(&rows)?;
    let late = (!rep.diffs.is_empty()).then(|| Failure::Golden(format!("{} differing fields", rep.diffs.len())));
    let csv_rows = rep
        .diffs
        .iter()
        .map(|x| vec![x.d.to_string(), x.field.clone(), x.expected.clone(), x.computed.clone()])
        .collect();
    let json = serde_json::to_value(&rep).map_err(|e| Failure::Internal(e.to_string()))?;
    Ok((Report::new(json, &["d", "field", "expected", "computed"], csv_rows), late))
}

fn cmd_classgroup(d: u64) -> Outcome {
    let di = squarefree_d(d)?;
    let cg = classgroup::class_group_structure(di)?;
    let four = cg.orders.iter().any(|o| o % 4 == 0);
    let rows = cg
        .forms
        .iter()
        .zip(&cg.orders)
        .map(|(f, o)| vec![f.a.to_string(), f.b.to_string(), f.c.to_string(), o.to_string()])
        .collect();
    let json = json!({
        "d": d,
        "discriminant": cg.discriminant,
        "h": cg.class_number(),
        "structure": cg.structure_string(),
        "order_four": four,
        "forms": cg.forms.iter().zip(&cg.orders).map(|(f, o)| json!({"a": f.a, "b": f.b, "c": f.c, "order": o})).collect::<Vec<_>>(),
    });
    Ok((Report::new(json, &["a", "b", "c", "order"], rows), None))
}

fn cmd_dset(d: u64) -> Outcome {
    squarefree_d(d)?;
    let rec = sieve::dset(d)?;
    let verdict = sieve::exceptional_verdict(d)?;
    let mut rows: Vec<Vec<String>> = rec.members.iter().map(|r| vec![r.to_string(), "member".into()]).collect();
    rows.extend(rec.shared_factor.iter().map(|r| vec![r.to_string(), "shared_factor".into()]));
    let json = json!({
        "d": d,
        "members": rec.members,
        "shared_factor": rec.shared_factor,
        "first_witness": rec.first_witness,
        "weight_sum": rec.weight_sum,
        "verdict": verdict,
    });
    Ok((Report::new(json, &["r", "kind"], rows), None))
}

fn gaussian(s: &str) -> Result<QuadInt, Failure> {
    let bad = || Failure::Usage(format!("expected a Gaussian integer A:B, got {s:?}"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let a: i128 = a.trim().parse().map_err(|_| bad())?;
    let b: i128 = b.trim().parse().map_err(|_| bad())?;
    Ok(QuadInt::new(2 * a, 2 * b, 1)?)
}

fn cmd_picard(disc: i128, variant: &str, height: u32, image_prime: Option<&str>, level: Option<&str>) -> Outcome {
    let variant: PicardVariant = variant.parse()?;
    let spec = surfaces::picard_canonical(disc, variant)?;
    let search = surfaces::search_not_embedded(&spec, height)?;
    let orient = surfaces::orientability_search(&spec, height)?;
    let mut json = json!({
        "form": spec.form.to_tuple(),
        "discriminant": spec.discriminant().to_string(),
        "closed": surfaces::is_closed(&spec)?.kind(),
        "search": record(&search, &spec)?,
        "orientation": record(&orient, &spec)?,
    });
    if let Some(p) = image_prime {
        let pi = gaussian(p)?;
        let norm = pi.norm();
        let sample = surfaces::stabilizer_sample(&spec, height)?;
        let order = surfaces::mod_p_image_order(&sample, norm as u64, pi)?;
        json["image"] = json!({ "prime": p, "p": norm.to_string(), "sample": sample.len(), "order": order });
    }
    if let Some(l) = level {
        let v = surfaces::picard_prime_verdict(gaussian(l)?)?;
        json["level"] = json!({ "prime": l, "verdict": format!("{v:?}") });
    }
    Ok((Report::fields(json), None))
}

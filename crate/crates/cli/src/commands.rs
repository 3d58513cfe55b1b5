use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use birthmark_core::align::{GapPenalty, SubstitutionMatrix};
use birthmark_core::eval::{
    self, roc_curve, run_experiment, select_group, write_report_tsv, write_roc_csv, write_scores_tsv,
    ExperimentParams, ModelKind,
};
use birthmark_core::hmm::{self, HmmModel};
use birthmark_core::msa::build_msa;
use birthmark_core::phmm::{build_phmm, phmm_forward_score, PhmmModel};
use birthmark_core::seq_data::{load_trace_dir, Alphabet, ObservationSequence, RawTrace, TraceCorpus};

use crate::config::ExperimentConfig;
use crate::{ScoringArgs, TrainArgs};

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Degenerate(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Degenerate(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Degenerate(m) => f.write_str(m),
        }
    }
}

impl From<birthmark_core::Error> for CliError {
    fn from(e: birthmark_core::Error) -> Self {
        match e {
            birthmark_core::Error::ZeroProbabilitySequence { .. } => CliError::Degenerate(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<crate::config::ConfigError> for CliError {
    fn from(e: crate::config::ConfigError) -> Self {
        CliError::Input(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, contents: &[u8]) -> CliResult {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_owned(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| io_error(&dir, e))?;
    tmp.write_all(contents).map_err(|e| io_error(path, e))?;
    tmp.persist(path).map_err(|e| io_error(path, e.error))?;
    Ok(())
}

fn write_output(path: Option<&Path>, contents: &[u8]) -> CliResult {
    match path {
        Some(p) => write_atomic(p, contents),
        None => io::stdout().write_all(contents).map_err(|e| CliError::Input(e.to_string())),
    }
}

fn load_traces(dir: &Path) -> CliResult<Vec<RawTrace>> {
    let traces = load_trace_dir(dir)?;
    if traces.is_empty() {
        return Err(CliError::Input(format!("no traces found in {}", dir.display())));
    }
    Ok(traces)
}

fn load_alphabet(path: &Path) -> CliResult<Alphabet> {
    Ok(Alphabet::from_text(&read_text(path)?)?)
}

fn load_subst(path: Option<&Path>, alphabet: &Alphabet) -> CliResult<SubstitutionMatrix> {
    let subst = match path {
        Some(p) => SubstitutionMatrix::from_text(&read_text(p)?)?,
        None => return Ok(SubstitutionMatrix::identity_default(alphabet.len(), alphabet.other_id())),
    };
    if subst.size() != alphabet.len() {
        return Err(CliError::Input(format!(
            "substitution matrix has {} symbols but the alphabet has {}",
            subst.size(),
            alphabet.len()
        )));
    }
    Ok(subst)
}

fn encode_all(traces: &[RawTrace], alphabet: &Alphabet) -> CliResult<Vec<ObservationSequence>> {
    Ok(TraceCorpus::encode("traces", traces, alphabet)?.sequences)
}

fn scoring(args: &ScoringArgs, alphabet: &Alphabet) -> CliResult<(SubstitutionMatrix, GapPenalty)> {
    Ok((
        load_subst(args.subst.as_deref(), alphabet)?,
        GapPenalty::new(args.gap_open, args.gap_extend)?,
    ))
}

fn choose_group(seqs: &[ObservationSequence], group_size: Option<usize>, seed: u64) -> CliResult<Vec<&[usize]>> {
    let all: Vec<usize> = (0..seqs.len()).collect();
    let picked = match group_size {
        Some(size) => select_group(&all, size, seed)?,
        None => all,
    };
    Ok(picked.into_iter().map(|i| seqs[i].ids.as_slice()).collect())
}

pub fn alphabet(dirs: &[PathBuf], max_symbols: usize, out: &Path) -> CliResult {
    let mut token_lists = Vec::new();
    for dir in dirs {
        token_lists.extend(load_traces(dir)?.into_iter().map(|t| t.tokens));
    }
    let alphabet = Alphabet::build(&token_lists, max_symbols)?;
    write_atomic(out, alphabet.to_text().as_bytes())?;
    println!(
        "alphabet: {} symbols{}",
        alphabet.len(),
        if alphabet.other_id().is_some() { " (including OTHER)" } else { "" }
    );
    Ok(())
}

fn parse_model_kind(name: &str) -> CliResult<ModelKind> {
    match name {
        "hmm" => Ok(ModelKind::HmmDynamic),
        other => Ok(other.parse()?),
    }
}

pub fn train(args: &TrainArgs) -> CliResult {
    let kind = parse_model_kind(&args.model)?;
    let alphabet = load_alphabet(&args.alphabet)?;
    let seqs = encode_all(&load_traces(&args.traces)?, &alphabet)?;

    if kind.is_hmm() {
        let report = hmm::train_multi(&seqs, args.states, alphabet.len(), args.iterations, args.seed)?;
        for w in &report.warnings {
            eprintln!("warning: {w:?}");
        }
        if args.strict && !report.warnings.is_empty() {
            return Err(CliError::Degenerate(format!(
                "{} degenerate-state warnings during training",
                report.warnings.len()
            )));
        }
        write_atomic(&args.out, report.final_model.to_text().as_bytes())?;
        println!(
            "hmm: N={} M={} iterations={} (ran {}) final log-likelihood {}",
            args.states,
            alphabet.len(),
            args.iterations,
            report.iterations_run,
            report.final_log_likelihood()
        );
    } else {
        let (subst, gap) = scoring(&args.scoring, &alphabet)?;
        let group = choose_group(&seqs, args.group_size, args.seed)?;
        let msa = build_msa(&group, &subst, gap)?;
        let model = build_phmm(&msa, alphabet.len())?;
        write_atomic(&args.out, model.to_text(&alphabet)?.as_bytes())?;
        println!(
            "phmm: {} sequences, msa width {}, match states N={}",
            group.len(),
            msa.width(),
            model.n_match()
        );
    }
    Ok(())
}

enum LoadedModel {
    Hmm(HmmModel),
    Phmm(PhmmModel),
}

pub fn score(model_path: &Path, traces: &Path, alphabet_path: Option<&Path>, out: Option<&Path>) -> CliResult {
    let text = read_text(model_path)?;
    let (model, alphabet) = if text.starts_with("PHMM v1") {
        let (model, embedded) = PhmmModel::from_text(&text)?;
        if let Some(p) = alphabet_path {
            if load_alphabet(p)? != embedded {
                return Err(CliError::Input("alphabet file differs from the model's alphabet".into()));
            }
        }
        (LoadedModel::Phmm(model), embedded)
    } else {
        let model = HmmModel::from_text(&text)?;
        let path = alphabet_path.ok_or_else(|| CliError::Input("scoring an HMM requires --alphabet".into()))?;
        let alphabet = load_alphabet(path)?;
        if alphabet.len() != model.n_symbols() {
            return Err(CliError::Input(format!(
                "model has {} symbols but the alphabet has {}",
                model.n_symbols(),
                alphabet.len()
            )));
        }
        (LoadedModel::Hmm(model), alphabet)
    };

    let seqs = encode_all(&load_traces(traces)?, &alphabet)?;
    let mut table = String::from("name\tscore\n");
    for s in &seqs {
        let value = match &model {
            LoadedModel::Hmm(m) => hmm::score(m, &s.ids)?,
            LoadedModel::Phmm(m) => phmm_forward_score(m, &s.ids)?.per_symbol,
        };
        table.push_str(&format!("{}\t{value}\n", s.source_name));
    }
    write_output(out, table.as_bytes())
}

pub fn experiment(config_path: &Path, out_dir: &Path, strict: bool) -> CliResult {
    let base = config_path.parent().unwrap_or(Path::new("."));
    let cfg = ExperimentConfig::parse(&read_text(config_path)?, base)?;
    let family_raw = load_traces(&cfg.family_dir)?;
    let benign_raw = load_traces(&cfg.benign_dir)?;
    let token_lists: Vec<Vec<String>> = family_raw
        .iter()
        .chain(&benign_raw)
        .map(|t| t.tokens.clone())
        .collect();
    let alphabet = Alphabet::build(&token_lists, cfg.max_symbols)?;
    let family = encode_all(&family_raw, &alphabet)?;
    let benign = encode_all(&benign_raw, &alphabet)?;

    let mut params = ExperimentParams::new(
        cfg.family_name(),
        cfg.model,
        load_subst(cfg.subst.as_deref(), &alphabet)?,
    );
    params.n_states = cfg.states;
    params.iterations = cfg.iterations;
    params.folds = cfg.folds;
    params.group_size = cfg.group_size;
    params.seed = cfg.seed;
    params.gap = GapPenalty::new(cfg.gap_open, cfg.gap_extend)?;

    let report = run_experiment(&params, &family, &benign, alphabet.len())?;
    for (k, f) in report.folds.iter().enumerate() {
        for w in &f.warnings {
            eprintln!("warning: fold {k}: {w:?}");
        }
    }
    if strict && report.warning_count() > 0 {
        return Err(CliError::Degenerate(format!(
            "{} degenerate-state warnings during training",
            report.warning_count()
        )));
    }

    fs::create_dir_all(out_dir).map_err(|e| io_error(out_dir, e))?;
    let render = |f: &dyn Fn(&mut Vec<u8>) -> io::Result<()>| -> CliResult<Vec<u8>> {
        let mut buf = Vec::new();
        f(&mut buf).map_err(|e| CliError::Input(e.to_string()))?;
        Ok(buf)
    };
    let stem = format!("{}_{}", report.family, report.model);
    write_atomic(
        &out_dir.join(format!("report_{stem}.tsv")),
        &render(&|b| write_report_tsv(std::slice::from_ref(&report), b))?,
    )?;
    write_atomic(
        &out_dir.join(eval::scores_file_name(&report)),
        &render(&|b| write_scores_tsv(&report, b))?,
    )?;
    for (k, f) in report.folds.iter().enumerate() {
        write_atomic(
            &out_dir.join(eval::roc_file_name(&report, k)),
            &render(&|b| write_roc_csv(&f.roc, b))?,
        )?;
    }

    println!(
        "{} {}: {} family, {} benign traces, {} symbols, {} folds",
        report.family,
        report.model,
        family.len(),
        benign.len(),
        alphabet.len(),
        cfg.folds
    );
    for (k, auc) in report.fold_aucs().iter().enumerate() {
        println!("fold {k}\tauc {auc}");
    }
    println!("mean auc {}", report.mean_auc());
    Ok(())
}

pub fn msa(
    traces: &Path,
    alphabet_path: &Path,
    args: &ScoringArgs,
    group_size: Option<usize>,
    seed: u64,
    out: Option<&Path>,
) -> CliResult {
    let alphabet = load_alphabet(alphabet_path)?;
    let seqs = encode_all(&load_traces(traces)?, &alphabet)?;
    let (subst, gap) = scoring(args, &alphabet)?;
    let group = choose_group(&seqs, group_size, seed)?;
    let msa = build_msa(&group, &subst, gap)?;
    write_output(out, msa.to_text(&alphabet)?.as_bytes())
}

pub fn roc(scores_path: &Path, out: &Path) -> CliResult {
    let text = read_text(scores_path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "label\tname\tscore" => {}
        _ => return Err(CliError::Input("score table must start with \"label\tname\tscore\"".into())),
    }
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: &str| CliError::Input(format!("{}:{}: {msg}", scores_path.display(), idx + 1));
        let fields: Vec<&str> = line.split('\t').collect();
        let [label, _, value] = fields[..] else {
            return Err(bad("expected three tab-separated fields"));
        };
        let score: f64 = value.trim().parse().map_err(|_| bad("invalid score"))?;
        match label {
            "malware" => pos.push(score),
            "benign" => neg.push(score),
            _ => return Err(bad("label must be malware or benign")),
        }
    }
    let curve = roc_curve(&pos, &neg)?;
    let mut buf = Vec::new();
    write_roc_csv(&curve, &mut buf).map_err(|e| CliError::Input(e.to_string()))?;
    write_atomic(out, &buf)?;
    println!("auc {}", curve.auc);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_exit_codes() {
        let zero: CliError = birthmark_core::Error::ZeroProbabilitySequence { step: 3 }.into();
        assert_eq!(zero.exit_code(), 3);
        let input: CliError = birthmark_core::Error::EmptyCorpus.into();
        assert_eq!(input.exit_code(), 2);
        assert_eq!(CliError::Degenerate("x".into()).exit_code(), 3);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "second");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
        assert!(write_atomic(&dir.path().join("missing/out.txt"), b"x").is_err());
    }
}

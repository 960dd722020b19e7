use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use memword_core::bounds::{chi_error_bound, clamp_probability, hoeffding_bound, HoeffdingInput};
use memword_core::estimator::{checkpoint_reports, geometric_checkpoints, CheckpointReport};
use memword_core::oracle::{ChainSpec, ExplicitChain};
use memword_core::process::{
    build_adversary, relabel, sample_even_process, sample_explicit, sample_ryabko, AdversaryConfig,
    NeverOne, OrderChi, Relabeling, SequenceEstimator, ShortestWord, StagePlan,
};
use memword_core::{EstimatorParams, Sequence, Word};
use serde::Serialize;

use crate::config::{pick, FileConfig};
use crate::{
    AdversaryArgs, BoundArgs, BoundKind, EstimateArgs, EstimatorArgs, OracleArgs, ProcessArgs,
    SimulateArgs,
};

enum Source {
    Ryabko(Relabeling),
    Even,
    Chain(Box<ExplicitChain>),
}

impl Source {
    fn resolve(args: &ProcessArgs, file: &FileConfig) -> Result<Option<Self>> {
        let process = pick(&args.process, &file.process);
        let chain = pick(&args.chain, &file.chain);
        let plan = pick(&args.plan, &file.plan);
        let given = [process.is_some(), chain.is_some(), plan.is_some()];
        if given.iter().filter(|&&g| g).count() > 1 {
            bail!("give only one of --process, --chain, --plan");
        }
        if let Some(name) = process {
            return match name.as_str() {
                "ryabko" => Ok(Some(Source::Ryabko(Relabeling::identity()))),
                "ryabko-f0" => Ok(Some(Source::Ryabko(Relabeling::initial()))),
                "even" => Ok(Some(Source::Even)),
                other => bail!("unknown process {other:?} (expected ryabko, ryabko-f0, even)"),
            };
        }
        if let Some(path) = chain {
            return Ok(Some(Source::Chain(Box::new(load_chain(&path)?))));
        }
        if let Some(path) = plan {
            let plan: StagePlan = read_json(&path)?;
            plan.check_invariants()
                .map_err(|e| anyhow!("stage plan {} is inconsistent: {e}", path.display()))?;
            return Ok(Some(Source::Ryabko(plan.final_relabeling())));
        }
        Ok(None)
    }

    fn sample(&self, length: usize, seed: u64) -> Sequence {
        match self {
            Source::Ryabko(f) => relabel(&sample_ryabko(length, seed), f),
            Source::Even => sample_even_process(length, seed),
            Source::Chain(c) => sample_explicit(c, length, seed),
        }
    }
}

fn load_chain(path: &Path) -> Result<ExplicitChain> {
    let spec: ChainSpec = read_json(path)?;
    ExplicitChain::from_spec(&spec).with_context(|| format!("chain {}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_sequence(path: &Path) -> Result<Sequence> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Sequence::read_from(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn params(args: &EstimatorArgs, file: &FileConfig) -> Result<EstimatorParams> {
    let gamma = pick(&args.gamma, &file.gamma).unwrap_or(memword_core::estimator::DEFAULT_GAMMA);
    let beta = pick(&args.beta, &file.beta).unwrap_or(memword_core::estimator::DEFAULT_BETA);
    Ok(EstimatorParams::new(gamma, beta)?)
}

pub fn simulate(args: &SimulateArgs, file: &FileConfig) -> Result<()> {
    let source = Source::resolve(&args.process, file)?
        .ok_or_else(|| anyhow!("simulate needs --process, --chain or --plan"))?;
    let length = pick(&args.length, &file.length).ok_or_else(|| anyhow!("missing --length"))?;
    let seed = pick(&args.seed, &file.seed).unwrap_or(1);
    let output = pick(&args.output, &file.output);

    let seq = source.sample(length, seed);
    let mut w = sink(output.as_deref())?;
    seq.write_to(&mut w)?;
    w.flush()?;
    drop(w);

    if let Source::Chain(chain) = &source {
        let report = OracleReport::new(chain, Some(&seq))?;
        let text = serde_json::to_string_pretty(&report)?;
        // keep stdout clean when it carries the sample path
        if output.is_some() {
            println!("{text}");
        } else {
            eprintln!("{text}");
        }
    }
    Ok(())
}

pub fn estimate(args: &EstimateArgs, file: &FileConfig) -> Result<()> {
    let base = params(&args.estimator, file)?;
    let input = pick(&args.input, &file.input);
    let source = Source::resolve(&args.process, file)?;
    let output = pick(&args.output, &file.output);

    let runs: Vec<(Option<u64>, Sequence)> = match (input, source) {
        (Some(_), Some(_)) => bail!("give either --input or a process, not both"),
        (None, None) => bail!("estimate needs --input or a process"),
        (Some(path), None) => vec![(None, read_sequence(&path)?)],
        (None, Some(source)) => {
            let length = pick(&args.length, &file.length)
                .or_else(|| {
                    pick(&args.checkpoints, &file.checkpoints)
                        .and_then(|c| c.last().map(|&n| n + 1))
                })
                .ok_or_else(|| anyhow!("missing --length"))?;
            let seeds = pick(&args.seeds, &file.seeds).unwrap_or_else(|| vec![1]);
            if seeds.is_empty() {
                bail!("seed list is empty");
            }
            seeds
                .into_iter()
                .map(|s| (Some(s), source.sample(length, s)))
                .collect()
        }
    };

    let mut w = csv::Writer::from_writer(sink(output.as_deref())?);
    let seeded = runs[0].0.is_some();
    let mut header = vec!["n", "chi", "threshold", "deltas", "support_sizes"];
    if seeded {
        header.insert(0, "seed");
    }
    w.write_record(&header)?;
    for (seed, seq) in &runs {
        let horizon = seq.horizon().ok_or_else(|| anyhow!("sequence is empty"))?;
        let checkpoints = pick(&args.checkpoints, &file.checkpoints)
            .unwrap_or_else(|| geometric_checkpoints(horizon));
        let p = base.clone().with_checkpoints(checkpoints)?;
        let reports = checkpoint_reports(seq, &p)
            .with_context(|| format!("sequence holds {} symbols", seq.len()))?;
        for r in reports {
            let mut row = csv_row(&r);
            if let Some(s) = seed {
                row.insert(0, s.to_string());
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_row(r: &CheckpointReport) -> Vec<String> {
    let join = |xs: Vec<String>| xs.join(";");
    vec![
        r.n.to_string(),
        r.chi.to_string(),
        r.threshold.to_string(),
        join(r.deltas.iter().map(f64::to_string).collect()),
        join(r.support_sizes.iter().map(usize::to_string).collect()),
    ]
}

pub fn adversary(args: &AdversaryArgs, file: &FileConfig) -> Result<()> {
    let p = params(&args.estimator, file)?;
    let plugin = pick(&args.plugin, &file.plugin).unwrap_or_else(|| "shortest-word".into());
    let h: Box<dyn SequenceEstimator> = match plugin.as_str() {
        "shortest-word" => Box::new(ShortestWord(p)),
        "chi" => Box::new(OrderChi(p)),
        "never-one" => Box::new(NeverOne),
        other => bail!("unknown plugin {other:?} (expected shortest-word, chi, never-one)"),
    };
    let defaults = AdversaryConfig::default();
    let replicates = pick(&args.replicates, &file.replicates).unwrap_or(defaults.replicates);
    if replicates == 0 {
        bail!("--replicates must be positive");
    }
    let cfg = AdversaryConfig {
        stages: pick(&args.stages, &file.stages).unwrap_or(defaults.stages),
        replicates,
        margin: pick(&args.margin, &file.margin)
            .unwrap_or_else(|| memword_core::bounds::hoeffding_margin(replicates, 0.05)),
        seed: pick(&args.seed, &file.seed).unwrap_or(defaults.seed),
        horizon_cap: pick(&args.cap, &file.cap).unwrap_or(defaults.horizon_cap),
        recheck: true,
    };
    let plan = build_adversary(h.as_ref(), &cfg)?;
    plan.check_invariants()
        .map_err(|e| anyhow!("constructed plan violates an invariant: {e}"))?;

    write_json(&plan, pick(&args.output, &file.output).as_deref())?;
    if let Some(path) = pick(&args.csv, &file.csv) {
        write_search_csv(&plan, &path)?;
    }
    Ok(())
}

fn write_search_csv(plan: &StagePlan, path: &PathBuf) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record([
        "stage",
        "big_n",
        "n",
        "target",
        "success",
        "accepted",
        "final_success",
    ])?;
    for s in &plan.stages {
        for step in &s.search {
            let accepted = step.n == s.small_n;
            let fin = match (accepted, s.final_success) {
                (true, Some(x)) => x.to_string(),
                _ => String::new(),
            };
            w.write_record([
                s.stage.to_string(),
                s.big_n.to_string(),
                step.n.to_string(),
                s.target.to_string(),
                step.success.to_string(),
                accepted.to_string(),
                fin,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct OracleReport {
    order: usize,
    alphabet: usize,
    /// Stationary law of the length-`order` blocks, indexed base-`alphabet`.
    stationary: Vec<f64>,
    minimal_words: Vec<Word>,
    longest_minimal_length: usize,
    shortest_memory_length: usize,
    /// Exact discrepancy for `k = 0..order`.
    deltas: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    suffix_memory_length: Option<usize>,
}

impl OracleReport {
    fn new(chain: &ExplicitChain, seq: Option<&Sequence>) -> Result<Self> {
        let report = chain.memory_word_report();
        let suffix_memory_length = match seq {
            Some(s) if s.len() >= chain.order() => Some(chain.suffix_memory_length(s)?),
            _ => None,
        };
        Ok(Self {
            order: chain.order(),
            alphabet: chain.alphabet(),
            stationary: chain.stationary().to_vec(),
            minimal_words: report.minimal_words.into_iter().collect(),
            longest_minimal_length: report.longest_minimal_length,
            shortest_memory_length: report.shortest_memory_length,
            deltas: (0..chain.order()).map(|k| chain.delta_exact(k)).collect(),
            suffix_memory_length,
        })
    }
}

pub fn oracle(args: &OracleArgs, file: &FileConfig) -> Result<()> {
    let path = pick(&args.chain, &file.chain).ok_or_else(|| anyhow!("oracle needs --chain"))?;
    let chain = load_chain(&path)?;
    let seq = pick(&args.input, &file.input)
        .map(|p| read_sequence(&p))
        .transpose()?;
    if let Some(s) = &seq {
        if s.len() < chain.order() {
            bail!(
                "sequence has {} symbols, chain order is {}",
                s.len(),
                chain.order()
            );
        }
        if let Some(&bad) = s
            .symbols()
            .iter()
            .find(|&&x| x as usize >= chain.alphabet())
        {
            bail!("symbol {bad} outside the chain alphabet");
        }
    }
    let report = OracleReport::new(&chain, seq.as_ref())?;
    write_json(&report, pick(&args.output, &file.output).as_deref())
}

pub fn bound(args: &BoundArgs, file: &FileConfig) -> Result<()> {
    match &args.kind {
        BoundKind::Chi {
            n,
            estimator,
            output,
        } => {
            let p = params(estimator, file)?;
            let grid = pick(n, &file.n).unwrap_or_else(|| vec![10, 100, 1_000, 10_000]);
            let mut w = csv::Writer::from_writer(sink(pick(output, &file.output).as_deref())?);
            w.write_record(["n", "gamma", "beta", "bound", "clamped"])?;
            for n in grid {
                let b = chi_error_bound(n, p.gamma(), p.beta());
                w.write_record([
                    n.to_string(),
                    p.gamma().to_string(),
                    p.beta().to_string(),
                    b.to_string(),
                    clamp_probability(b).to_string(),
                ])?;
            }
            w.flush()?;
        }
        BoundKind::Hoeffding {
            n,
            width,
            epsilon,
            output,
        } => {
            let grid = pick(n, &file.n).unwrap_or_else(|| vec![100]);
            let width = pick(width, &file.width).unwrap_or(1.0);
            let epsilon =
                pick(epsilon, &file.epsilon).ok_or_else(|| anyhow!("missing --epsilon"))?;
            let mut w = csv::Writer::from_writer(sink(pick(output, &file.output).as_deref())?);
            w.write_record(["n", "width", "epsilon", "bound", "clamped"])?;
            for n in grid {
                let b = hoeffding_bound(&HoeffdingInput::shared(n, 0.0, width, epsilon))?;
                w.write_record([
                    n.to_string(),
                    width.to_string(),
                    epsilon.to_string(),
                    b.to_string(),
                    clamp_probability(b).to_string(),
                ])?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

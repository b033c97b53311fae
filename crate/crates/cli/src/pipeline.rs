//! Stage orchestration: translate, score, rank, eval and sweeps.
//!
//! Every stage reads its inputs from and writes its outputs to the output
//! directory (see [`crate::layout`]), so stages can run as separate
//! invocations. Translation and scoring append results as they complete and
//! skip already-present entries when re-run, which makes an interrupted
//! batch resumable.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use cmir_core::corpus::{
    self, load_documents, load_qrels, load_queries, parse_run_file, write_run_file,
    DocumentCollection, InputFormat, QueryCollection, RunEntry,
};
use cmir_core::eval::{evaluate_run, MetricsReport};
use cmir_core::propagation::{propagate_with, ChainLink, Judgment};
use cmir_core::ranking::rank_documents;
use cmir_core::scorer::{
    append_score, parallel_map, read_score_table, score_batch, translate_text, DiskCache,
    HttpProvider, IdentityProvider, MockProvider, Provider, RelevanceScore, ResponseCache,
    ScorerError,
};
use serde::{Deserialize, Serialize};

use crate::config::{PipelineConfig, ProviderKind};
use crate::error::CliError;
use crate::layout::{ensure_parent, tmp_path, write_atomic, Layout};
use crate::report::{SweepReport, SweepRow};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TranslateSummary {
    pub queries_translated: usize,
    pub documents_translated: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreSummary {
    pub path: PathBuf,
    pub pairs: usize,
    pub newly_scored: usize,
    pub degraded: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankSummary {
    pub run_path: PathBuf,
    pub queries: usize,
    pub entries: usize,
}

/// One line of the judgment export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentRecord {
    pub query_id: String,
    #[serde(flatten)]
    pub judgment: Judgment,
}

#[derive(Debug, Deserialize)]
struct TextProgress {
    id: String,
    text: String,
    translated_text: Option<String>,
}

pub struct Pipeline {
    config: PipelineConfig,
    layout: Layout,
    provider: Option<Arc<dyn Provider>>,
    cache: Arc<dyn ResponseCache>,
}

impl Pipeline {
    /// Builds the provider and disk cache named by `config`. For the HTTP
    /// provider a missing credential fails here, before any request.
    pub fn from_config(config: PipelineConfig) -> Result<Self, CliError> {
        config.validate()?;
        let provider: Arc<dyn Provider> = match config.provider {
            ProviderKind::Http => Arc::new(HttpProvider::new(&config.provider_config)?),
            ProviderKind::Identity => Arc::new(IdentityProvider),
            ProviderKind::Mock => match &config.mock_table {
                Some(path) => Arc::new(MockProvider::load(path).map_err(|e| {
                    CliError::Usage(format!("cannot load mock table {}: {e}", path.display()))
                })?),
                None => {
                    log::warn!("mock provider without a table answers 0.0 to every prompt");
                    Arc::new(MockProvider::default())
                }
            },
        };
        let cache = Arc::new(DiskCache::open(config.cache_dir())?);
        Ok(Self::with_parts(config, Some(provider), cache))
    }

    /// A pipeline for the provider-free stages (rank, eval).
    pub fn offline(config: PipelineConfig) -> Result<Self, CliError> {
        config.validate()?;
        Ok(Self::with_parts(
            config,
            None,
            Arc::new(cmir_core::scorer::NoCache),
        ))
    }

    pub fn with_parts(
        config: PipelineConfig,
        provider: Option<Arc<dyn Provider>>,
        cache: Arc<dyn ResponseCache>,
    ) -> Self {
        let layout = Layout::new(&config.output_dir);
        Self {
            config,
            layout,
            provider,
            cache,
        }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    fn provider(&self) -> Result<&dyn Provider, CliError> {
        self.provider
            .as_deref()
            .ok_or_else(|| CliError::Usage("this stage needs a provider".into()))
    }

    /// Same provider and cache, different temperature and run tag.
    pub fn at_temperature(&self, temperature: f64) -> Self {
        Self::with_parts(
            self.config.at_temperature(temperature),
            self.provider.clone(),
            self.cache.clone(),
        )
    }

    fn load_raw(&self) -> Result<(QueryCollection, DocumentCollection), CliError> {
        let queries = load_queries(self.config.queries_path()?, self.config.queries_format())?;
        let docs = load_documents(self.config.corpus_path()?, self.config.corpus_format())?;
        Ok((queries, docs))
    }

    /// Translated collections when the translate stage has run, raw input
    /// otherwise.
    fn load_for_scoring(&self) -> Result<(QueryCollection, DocumentCollection), CliError> {
        let (tq, td) = (
            self.layout.translated_queries(),
            self.layout.translated_documents(),
        );
        if tq.exists() && td.exists() {
            Ok((
                load_queries(&tq, InputFormat::Jsonl)?,
                load_documents(&td, InputFormat::Jsonl)?,
            ))
        } else {
            self.load_raw()
        }
    }

    pub fn translate(&self) -> Result<TranslateSummary, CliError> {
        let (mut queries, mut docs) = self.load_raw()?;
        let scope = self.config.translate;
        let mut summary = TranslateSummary::default();

        let items: Vec<(String, String, Option<String>)> = queries
            .iter()
            .map(|q| {
                (
                    q.query_id.clone(),
                    q.raw_text.clone(),
                    q.translated_text.clone(),
                )
            })
            .collect();
        let path = self.layout.translated_queries();
        let (done, skipped) = self.translate_items(&items, scope.queries(), &path)?;
        summary.queries_translated = done;
        summary.skipped += skipped;
        for (id, text) in read_translations(&path)? {
            queries.set_translation(&id, text);
        }
        write_collection(&path, |p| corpus::write_queries_jsonl(&queries, p))?;

        let items: Vec<(String, String, Option<String>)> = docs
            .iter()
            .map(|d| {
                (
                    d.doc_id.clone(),
                    d.raw_text.clone(),
                    d.translated_text.clone(),
                )
            })
            .collect();
        let path = self.layout.translated_documents();
        let (done, skipped) = self.translate_items(&items, scope.documents(), &path)?;
        summary.documents_translated = done;
        summary.skipped += skipped;
        for (id, text) in read_translations(&path)? {
            docs.set_translation(&id, text);
        }
        write_collection(&path, |p| corpus::write_documents_jsonl(&docs, p))?;

        log::info!(
            "translated {} queries and {} documents ({} already done)",
            summary.queries_translated,
            summary.documents_translated,
            summary.skipped
        );
        Ok(summary)
    }

    /// Appends `{id, text, translated_text}` lines to `progress` for every
    /// item not already present there. Returns (newly translated, skipped).
    fn translate_items(
        &self,
        items: &[(String, String, Option<String>)],
        enabled: bool,
        progress: &Path,
    ) -> Result<(usize, usize), CliError> {
        let existing = read_progress(progress)?;
        let known: HashMap<&str, &str> = items
            .iter()
            .map(|(id, t, _)| (id.as_str(), t.as_str()))
            .collect();
        // keep only progress lines that still match the input
        let kept: Vec<&TextProgress> = existing
            .iter()
            .filter(|p| {
                p.translated_text.is_some() && known.get(p.id.as_str()) == Some(&p.text.as_str())
            })
            .collect();
        let done_ids: HashSet<&str> = kept.iter().map(|p| p.id.as_str()).collect();
        rewrite_progress(progress, &kept)?;

        let mut out = open_append(progress)?;
        let mut pending = Vec::new();
        for (id, raw, given) in items {
            if done_ids.contains(id.as_str()) {
                continue;
            }
            match (enabled, given) {
                (true, None) => pending.push((id, raw)),
                (true, Some(t)) => write_progress_line(&mut out, id, raw, t)?,
                (false, _) => write_progress_line(&mut out, id, raw, raw)?,
            }
        }
        out.flush()?;

        let provider = if pending.is_empty() {
            None
        } else {
            Some(self.provider()?)
        };
        let chunk = self.config.provider_config.parallelism_limit * 16;
        let mut translated = 0;
        for batch in pending.chunks(chunk.max(1)) {
            let provider = provider.expect("provider present when work is pending");
            let results = parallel_map(
                batch,
                self.config.provider_config.parallelism_limit,
                |(_, raw)| {
                    translate_text(
                        raw,
                        &self.config.provider_config,
                        provider,
                        self.cache.as_ref(),
                    )
                },
            );
            let mut first_err: Option<ScorerError> = None;
            for ((id, raw), r) in batch.iter().zip(results) {
                match r {
                    Ok(t) => {
                        write_progress_line(&mut out, id, raw, &t)?;
                        translated += 1;
                    }
                    Err(e) => {
                        first_err.get_or_insert(e);
                    }
                }
            }
            out.flush()?;
            if let Some(e) = first_err {
                return Err(e.into());
            }
        }
        Ok((translated, done_ids.len()))
    }

    pub fn score(&self) -> Result<ScoreSummary, CliError> {
        let provider = self.provider()?;
        let (queries, docs) = self.load_for_scoring()?;
        let cfg = &self.config.provider_config;
        let path = self.layout.scores(&self.config.run_tag);
        let provider_name = provider.name();

        let mut done: HashMap<(String, String), RelevanceScore> = HashMap::new();
        if path.exists() {
            for s in read_score_table(&path)? {
                let fresh = s.temperature == cfg.temperature
                    && s.provider == provider_name
                    && queries.get(&s.query_id).is_some()
                    && docs.get(&s.doc_id).is_some();
                if fresh {
                    done.insert((s.query_id.clone(), s.doc_id.clone()), s);
                }
            }
        }
        let ordered = |done: &HashMap<(String, String), RelevanceScore>| -> Vec<RelevanceScore> {
            queries
                .iter()
                .flat_map(|q| docs.iter().map(move |d| (q, d)))
                .filter_map(|(q, d)| done.get(&(q.query_id.clone(), d.doc_id.clone())).cloned())
                .collect()
        };
        write_scores(&path, &ordered(&done))?;

        let pending: Vec<_> = queries
            .iter()
            .flat_map(|q| docs.iter().map(move |d| (q, d)))
            .filter(|(q, d)| !done.contains_key(&(q.query_id.clone(), d.doc_id.clone())))
            .collect();
        let total = queries.len() * docs.len();
        log::info!(
            "scoring {} of {} pairs at temperature {} ({} already scored)",
            pending.len(),
            total,
            cfg.temperature,
            done.len()
        );

        let mut out = open_append(&path)?;
        let mut newly = 0;
        let mut degraded = 0;
        let every = self.config.progress_every.max(1);
        for batch in pending.chunks((cfg.parallelism_limit * 16).max(1)) {
            let results = score_batch(batch, cfg, provider, self.cache.as_ref());
            let mut first_err = None;
            for r in results {
                match r {
                    Ok(s) => {
                        append_score(&mut out, &s)?;
                        degraded += usize::from(s.degraded);
                        newly += 1;
                        if newly % every == 0 {
                            log::info!("scored {newly}/{} pending pairs", pending.len());
                        }
                        done.insert((s.query_id.clone(), s.doc_id.clone()), s);
                    }
                    Err(e) => {
                        first_err.get_or_insert(e);
                    }
                }
            }
            out.flush()?;
            if let Some(e) = first_err {
                return Err(e.into());
            }
        }
        drop(out);
        if degraded > 0 {
            log::warn!("{degraded} pair(s) fell back to a degraded score of 0.0");
        }
        write_scores(&path, &ordered(&done))?;
        Ok(ScoreSummary {
            path,
            pairs: total,
            newly_scored: newly,
            degraded,
        })
    }

    /// Propagates each query's scores in document order, ranks, and writes
    /// the run file plus a judgment export.
    pub fn rank(&self) -> Result<RankSummary, CliError> {
        let (_, docs) = self.load_for_scoring()?;
        let tag = &self.config.run_tag;
        let scores_path = self.layout.scores(tag);
        if !scores_path.exists() {
            return Err(CliError::Data(format!(
                "no score table at {}; run `score` first",
                scores_path.display()
            )));
        }
        let scores = read_score_table(&scores_path)?;
        if scores.is_empty() {
            log::warn!(
                "score table {} is empty; writing an empty run",
                scores_path.display()
            );
        }

        let mut chains: BTreeMap<String, Vec<ChainLink>> = BTreeMap::new();
        for s in scores {
            let doc = docs.get(&s.doc_id).ok_or_else(|| {
                CliError::Data(format!("score for unknown document `{}`", s.doc_id))
            })?;
            chains.entry(s.query_id).or_default().push(ChainLink::new(
                s.doc_id,
                doc.sequence_index,
                s.score,
            ));
        }

        let mut entries: Vec<RunEntry> = Vec::new();
        let mut judgments = Vec::new();
        for (qid, mut chain) in chains {
            chain.sort_by_key(|l| l.sequence_index);
            let judged = propagate_with(&chain, &self.config.propagation_constants)?;
            let ranked = rank_documents(&qid, &judged, self.config.mode, self.config.depth)?;
            entries.extend(ranked.to_run_entries(tag));
            judgments.extend(judged.into_iter().map(|judgment| JudgmentRecord {
                query_id: qid.clone(),
                judgment,
            }));
        }
        let queries = entries
            .iter()
            .map(|e| e.query_id.as_str())
            .collect::<HashSet<_>>()
            .len();

        let run_path = self.layout.run(tag);
        ensure_parent(&run_path)?;
        let tmp = tmp_path(&run_path);
        write_run_file(&entries, &tmp)?;
        fs::rename(&tmp, &run_path)?;

        let mut body = String::new();
        for j in &judgments {
            body.push_str(&serde_json::to_string(j).map_err(std::io::Error::other)?);
            body.push('\n');
        }
        write_atomic(&self.layout.judgments(tag), body.as_bytes())?;

        log::info!(
            "wrote {} entries for {queries} queries to {}",
            entries.len(),
            run_path.display()
        );
        Ok(RankSummary {
            run_path,
            queries,
            entries: entries.len(),
        })
    }

    /// Evaluates `run_path` and writes `reports/<run_tag>.{json,txt}`.
    pub fn eval(&self, run_path: &Path, qrels_path: &Path) -> Result<MetricsReport, CliError> {
        let run = parse_run_file(run_path)?;
        let qrels = load_qrels(qrels_path)?;
        let report = evaluate_run(&run, &qrels)?;
        write_atomic(
            &self.layout.report_json(&report.run_tag),
            report.to_json().as_bytes(),
        )?;
        write_atomic(
            &self.layout.report_txt(&report.run_tag),
            report.to_table().as_bytes(),
        )?;
        Ok(report)
    }

    /// translate, score, rank, eval.
    pub fn run_all(&self) -> Result<MetricsReport, CliError> {
        let qrels = self.config.qrels_path()?.to_path_buf();
        self.translate()?;
        self.score()?;
        let ranked = self.rank()?;
        self.eval(&ranked.run_path, &qrels)
    }

    /// Translates once, then scores, ranks and evaluates at each temperature
    /// under the tag `<run_tag>-t<temperature>`.
    pub fn sweep(&self, temperatures: &[f64]) -> Result<SweepReport, CliError> {
        if temperatures.is_empty() {
            return Err(CliError::Usage(
                "sweep needs at least one temperature".into(),
            ));
        }
        for &t in temperatures {
            if !(0.0..=1.0).contains(&t) {
                return Err(CliError::Usage(format!(
                    "temperature {t} must lie in [0, 1]"
                )));
            }
        }
        let qrels = self.config.qrels_path()?.to_path_buf();
        self.translate()?;
        let mut rows = Vec::with_capacity(temperatures.len());
        for &t in temperatures {
            let stage = self.at_temperature(t);
            stage.score()?;
            let ranked = stage.rank()?;
            let report = stage.eval(&ranked.run_path, &qrels)?;
            rows.push(SweepRow::new(t, &report));
        }
        let sweep = SweepReport {
            run_tag: self.config.run_tag.clone(),
            rows,
        };
        write_atomic(
            &self.layout.sweep_json(&sweep.run_tag),
            sweep.to_json().as_bytes(),
        )?;
        write_atomic(
            &self.layout.sweep_txt(&sweep.run_tag),
            sweep.to_table().as_bytes(),
        )?;
        Ok(sweep)
    }
}

fn read_progress(path: &Path) -> Result<Vec<TextProgress>, CliError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<TextProgress>(line) {
            Ok(p) => out.push(p),
            Err(_) if i + 1 == lines.len() && !text.ends_with('\n') => {
                log::warn!("dropping torn final line of {}", path.display());
            }
            Err(e) => {
                return Err(CliError::Data(format!("{}:{}: {e}", path.display(), i + 1)));
            }
        }
    }
    Ok(out)
}

fn read_translations(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    Ok(read_progress(path)?
        .into_iter()
        .filter_map(|p| p.translated_text.map(|t| (p.id, t)))
        .collect())
}

fn write_progress_line(
    w: &mut impl Write,
    id: &str,
    text: &str,
    translated: &str,
) -> Result<(), CliError> {
    let line = serde_json::json!({"id": id, "text": text, "translated_text": translated});
    writeln!(w, "{line}")?;
    Ok(())
}

fn rewrite_progress(path: &Path, kept: &[&TextProgress]) -> Result<(), CliError> {
    let mut body = String::new();
    for p in kept {
        let line =
            serde_json::json!({"id": p.id, "text": p.text, "translated_text": p.translated_text});
        body.push_str(&line.to_string());
        body.push('\n');
    }
    write_atomic(path, body.as_bytes())?;
    Ok(())
}

fn open_append(path: &Path) -> Result<BufWriter<fs::File>, CliError> {
    ensure_parent(path)?;
    Ok(BufWriter::new(
        OpenOptions::new().create(true).append(true).open(path)?,
    ))
}

fn write_collection(
    path: &Path,
    write: impl FnOnce(&Path) -> Result<(), corpus::CorpusError>,
) -> Result<(), CliError> {
    let tmp = tmp_path(path);
    write(&tmp)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_scores(path: &Path, scores: &[RelevanceScore]) -> Result<(), CliError> {
    ensure_parent(path)?;
    let tmp = tmp_path(path);
    cmir_core::scorer::write_score_table(scores, &tmp)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn cmd_translate(config: &PipelineConfig) -> Result<TranslateSummary, CliError> {
    Pipeline::from_config(config.clone())?.translate()
}

pub fn cmd_score(config: &PipelineConfig) -> Result<ScoreSummary, CliError> {
    Pipeline::from_config(config.clone())?.score()
}

pub fn cmd_rank(config: &PipelineConfig) -> Result<RankSummary, CliError> {
    Pipeline::offline(config.clone())?.rank()
}

/// Reports land under `config.output_dir`.
pub fn cmd_eval(
    config: &PipelineConfig,
    run_path: &Path,
    qrels_path: &Path,
) -> Result<MetricsReport, CliError> {
    Pipeline::offline(config.clone())?.eval(run_path, qrels_path)
}

pub fn cmd_sweep(config: &PipelineConfig, temperatures: &[f64]) -> Result<SweepReport, CliError> {
    Pipeline::from_config(config.clone())?.sweep(temperatures)
}

pub fn cmd_pipeline(config: &PipelineConfig) -> Result<MetricsReport, CliError> {
    Pipeline::from_config(config.clone())?.run_all()
}

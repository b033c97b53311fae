//! Synthetic corpora with a matching mock response table.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use cmir_cli::{PipelineConfig, ProviderKind};
use cmir_core::scorer::{build_relevance_prompt, build_translation_prompt, MockProvider};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use tempfile::TempDir;

pub struct Fixture {
    pub dir: TempDir,
    pub docs: PathBuf,
    pub queries: PathBuf,
    pub qrels: PathBuf,
    pub mock_table: PathBuf,
    pub mock: MockProvider,
    /// Raw score the mock returns for each (query, doc).
    pub scores: BTreeMap<(String, String), f64>,
}

pub fn doc_raw(i: usize) -> String {
    format!("mera order {i} abhi tak nahi aaya, kya status hai")
}

pub fn doc_english(i: usize) -> String {
    format!("my order {i} has not arrived yet, what is the status")
}

pub fn query_raw(j: usize) -> String {
    format!("delivery problem number {j} ke baare mein batao")
}

pub fn query_english(j: usize) -> String {
    format!("tell me about delivery problem number {j}")
}

impl Fixture {
    pub fn synthetic(n_docs: usize, n_queries: usize, seed: u64) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        let mut rng = StdRng::seed_from_u64(seed);
        let mut mock = MockProvider::default();
        let mut scores = BTreeMap::new();

        let mut docs = String::new();
        for i in 0..n_docs {
            docs.push_str(&format!("d{i}\t{}\n", doc_raw(i)));
            mock.insert(
                &build_translation_prompt(&doc_raw(i)).unwrap(),
                doc_english(i),
            );
        }
        let mut queries = String::new();
        let mut qrels = String::new();
        for j in 0..n_queries {
            queries.push_str(&format!("q{j}\t{}\n", query_raw(j)));
            mock.insert(
                &build_translation_prompt(&query_raw(j)).unwrap(),
                query_english(j),
            );
            let mut any_relevant = false;
            for i in 0..n_docs {
                let response = format!("{:.2}", rng.random_range(0..=20u32) as f64 * 0.05);
                let s: f64 = response.parse().unwrap();
                let prompt = build_relevance_prompt(&query_english(j), &doc_english(i)).unwrap();
                mock.insert(&prompt, response);
                scores.insert((format!("q{j}"), format!("d{i}")), s);
                let grade = u32::from(rng.random_bool(if s > 0.5 { 0.7 } else { 0.15 }));
                let grade = if i + 1 == n_docs && !any_relevant {
                    1
                } else {
                    grade
                };
                any_relevant |= grade > 0;
                qrels.push_str(&format!("q{j} 0 d{i} {grade}\n"));
            }
        }

        let docs_path = root.join("docs.tsv");
        let queries_path = root.join("queries.tsv");
        let qrels_path = root.join("qrels.txt");
        let mock_table = root.join("mock.json");
        fs::write(&docs_path, docs).unwrap();
        fs::write(&queries_path, queries).unwrap();
        fs::write(&qrels_path, qrels).unwrap();
        fs::write(
            &mock_table,
            serde_json::to_string_pretty(mock.table()).unwrap(),
        )
        .unwrap();
        Self {
            dir,
            docs: docs_path,
            queries: queries_path,
            qrels: qrels_path,
            mock_table,
            mock,
            scores,
        }
    }

    pub fn root(&self) -> &Path {
        self.dir.path()
    }

    /// Mock-provider config writing under `<root>/<out>`.
    pub fn config(&self, out: &str) -> PipelineConfig {
        let mut c = PipelineConfig {
            corpus_path: Some(self.docs.clone()),
            queries_path: Some(self.queries.clone()),
            qrels_path: Some(self.qrels.clone()),
            provider: ProviderKind::Mock,
            mock_table: Some(self.mock_table.clone()),
            output_dir: self.root().join(out),
            cache_dir: Some(self.root().join("cache")),
            run_tag: "synth".into(),
            ..PipelineConfig::default()
        };
        c.provider_config.parallelism_limit = 4;
        c
    }
}

//! Bundled mini-kernels shaped after the evaluation benchmarks: a large
//! stealable loop, two tiny-body loops that classify as fixed-size, a
//! mixed-affinity sections kernel (ALU-heavy "prime" sections against
//! memory-heavy table-walk sections), a plain block with asymmetric
//! branches for thread switching, and the worked 100-iteration scenario.

pub struct CorpusEntry {
    pub name: &'static str,
    pub source: &'static str,
}

pub const CORPUS: [CorpusEntry; 7] = [
    CorpusEntry {
        name: "fig2_like",
        source: include_str!("../corpus/fig2_like.comp.c"),
    },
    CorpusEntry {
        name: "figc_like",
        source: include_str!("../corpus/figc_like.comp.c"),
    },
    CorpusEntry {
        name: "ep_like",
        source: include_str!("../corpus/ep_like.comp.c"),
    },
    CorpusEntry {
        name: "cg_like",
        source: include_str!("../corpus/cg_like.comp.c"),
    },
    CorpusEntry {
        name: "is_like",
        source: include_str!("../corpus/is_like.comp.c"),
    },
    CorpusEntry {
        name: "sec_like",
        source: include_str!("../corpus/sec_like.comp.c"),
    },
    CorpusEntry {
        name: "mig_like",
        source: include_str!("../corpus/mig_like.comp.c"),
    },
];

pub fn get(name: &str) -> Option<&'static CorpusEntry> {
    CORPUS.iter().find(|e| e.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse, SourceProgram};

    #[test]
    fn every_kernel_parses() {
        for entry in &CORPUS {
            let sp = SourceProgram::new(format!("{}.comp.c", entry.name), entry.source);
            parse(&sp)
                .unwrap_or_else(|d| panic!("{} failed to parse:\n{}", entry.name, d.render()));
        }
    }
}

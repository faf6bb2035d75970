use crate::error::{Error, Result};
use crate::model::segments::SegmentKind;

/// Per-kind token length caps, marker token included for context kinds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaxLens {
    pub query: usize,
    pub title: usize,
    pub snippet: usize,
    pub rewrite: usize,
    pub intent: usize,
}

impl MaxLens {
    pub fn for_kind(&self, kind: SegmentKind) -> usize {
        match kind {
            SegmentKind::Query => self.query,
            SegmentKind::WebTitle => self.title,
            SegmentKind::WebSnippet => self.snippet,
            SegmentKind::QpRewrite => self.rewrite,
            SegmentKind::QpIntent => self.intent,
        }
    }

    /// Longest segment any kind allows; sizes the positional table.
    pub fn longest(&self) -> usize {
        self.query
            .max(self.title)
            .max(self.snippet)
            .max(self.rewrite)
            .max(self.intent)
    }
}

/// Highest context rank with its own embedding row; deeper ranks share the
/// last row.
pub const MAX_RANKS: usize = 16;

/// Hard cap on contexts per bundle (covers the largest ablation cell).
pub const MAX_CONTEXTS: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub num_encoder_layers: usize,
    pub num_decoder_layers: usize,
    /// Hidden size d.
    pub hidden_size: usize,
    /// Dense embedding size d'.
    pub dense_size: usize,
    pub vocab_size: usize,
    pub num_heads: usize,
    pub ffn_size: usize,
    pub max_len: MaxLens,
}

impl ModelConfig {
    /// Small profile sized so training and the full test suite run on a
    /// workstation in minutes.
    pub fn desk() -> Self {
        ModelConfig {
            num_encoder_layers: 4,
            num_decoder_layers: 4,
            hidden_size: 64,
            dense_size: 32,
            vocab_size: 512,
            num_heads: 4,
            ffn_size: 256,
            max_len: MaxLens {
                query: 8,
                title: 6,
                snippet: 8,
                rewrite: 6,
                intent: 8,
            },
        }
    }

    /// Production-shaped profile; kept for configuration completeness, not
    /// exercised by the test suite.
    pub fn paper() -> Self {
        ModelConfig {
            num_encoder_layers: 4,
            num_decoder_layers: 4,
            hidden_size: 512,
            dense_size: 128,
            vocab_size: 512,
            num_heads: 8,
            ffn_size: 2048,
            max_len: MaxLens {
                query: 16,
                title: 12,
                snippet: 16,
                rewrite: 12,
                intent: 16,
            },
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "paper" => Ok(Self::paper()),
            other => Err(Error::Config(format!(
                "unknown profile '{other}' (expected 'desk' or 'paper')"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_heads == 0 || self.hidden_size % self.num_heads != 0 {
            return Err(Error::Config(format!(
                "hidden size {} not divisible by head count {}",
                self.hidden_size, self.num_heads
            )));
        }
        if self.vocab_size < 4 {
            return Err(Error::Config(format!(
                "vocab size {} below reserved-id minimum 4",
                self.vocab_size
            )));
        }
        let lens = [
            self.max_len.query,
            self.max_len.title,
            self.max_len.snippet,
            self.max_len.rewrite,
            self.max_len.intent,
        ];
        if lens.iter().any(|&l| l == 0) {
            return Err(Error::Config("all max lengths must be >= 1".into()));
        }
        if self.num_encoder_layers == 0
            || self.num_decoder_layers == 0
            || self.hidden_size == 0
            || self.dense_size == 0
            || self.ffn_size == 0
        {
            return Err(Error::Config("all sizes must be >= 1".into()));
        }
        Ok(())
    }

    /// Serialize every integer field in a fixed order (checkpoint header).
    pub fn to_ints(&self) -> [u32; 12] {
        [
            self.num_encoder_layers as u32,
            self.num_decoder_layers as u32,
            self.hidden_size as u32,
            self.dense_size as u32,
            self.vocab_size as u32,
            self.num_heads as u32,
            self.ffn_size as u32,
            self.max_len.query as u32,
            self.max_len.title as u32,
            self.max_len.snippet as u32,
            self.max_len.rewrite as u32,
            self.max_len.intent as u32,
        ]
    }

    pub fn from_ints(v: &[u32; 12]) -> Self {
        ModelConfig {
            num_encoder_layers: v[0] as usize,
            num_decoder_layers: v[1] as usize,
            hidden_size: v[2] as usize,
            dense_size: v[3] as usize,
            vocab_size: v[4] as usize,
            num_heads: v[5] as usize,
            ffn_size: v[6] as usize,
            max_len: MaxLens {
                query: v[7] as usize,
                title: v[8] as usize,
                snippet: v[9] as usize,
                rewrite: v[10] as usize,
                intent: v[11] as usize,
            },
        }
    }
}

//! Byte-level tokenizer.
//!
//! Text maps to its UTF-8 bytes, one token per byte, so any model with a
//! vocabulary of at least 256 can consume arbitrary strings and the mapping
//! needs no learned state. Token ids above 255 are reserved for models that
//! want special tokens; the tokenizer itself never emits them.

use crate::error::{Error, Result};

/// Number of token ids the byte tokenizer can emit.
pub const BYTE_VOCAB: usize = 256;

/// Maps text to its UTF-8 bytes, one token per byte.
#[must_use]
pub fn tokenize(text: &str) -> Vec<u32> {
    text.bytes().map(u32::from).collect()
}

/// Inverse of [`tokenize`]. Fails on tokens above 255 or byte sequences that
/// are not valid UTF-8.
pub fn detokenize(tokens: &[u32]) -> Result<String> {
    let mut bytes = Vec::with_capacity(tokens.len());
    for (i, &t) in tokens.iter().enumerate() {
        let b = u8::try_from(t).map_err(|_| {
            Error::Input(format!("token {t} at position {i} is not a byte token"))
        })?;
        bytes.push(b);
    }
    String::from_utf8(bytes)
        .map_err(|e| Error::Input(format!("token sequence is not valid UTF-8: {e}")))
}

/// Checks that a model vocabulary can hold every byte token.
pub fn check_vocab(vocab: usize) -> Result<()> {
    if vocab < BYTE_VOCAB {
        return Err(Error::Config(format!(
            "byte-level tokenization needs a vocabulary of at least {BYTE_VOCAB}, model has {vocab}"
        )));
    }
    Ok(())
}

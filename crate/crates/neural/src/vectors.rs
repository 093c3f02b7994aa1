//! Loader for word vectors in the plain `token v1 .. vD` text format.

use std::path::Path;

use gpsr_core::corpus::Vocabulary;
use ndarray::Array2;

use crate::NeuralError;

/// One row per vocabulary entry; words missing from the file get zeros.
/// The dimension comes from the first non-blank line. Line numbers in
/// errors are 1-based.
pub fn parse_pretrained_vectors(text: &str, vocab: &Vocabulary) -> Result<Array2<f64>, NeuralError> {
    let mut dim = None;
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        let values: Vec<f64> = parts
            .map(str::parse::<f64>)
            .collect::<Result<_, _>>()
            .map_err(|_| NeuralError::MalformedLine(line_no))?;
        if values.is_empty() {
            return Err(NeuralError::MalformedLine(line_no));
        }
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => return Err(NeuralError::InconsistentDimension(line_no)),
            Some(_) => {}
        }
        if let Some(id) = vocab.get(word) {
            rows.push((id, values));
        }
    }
    let mut out = Array2::zeros((vocab.len(), dim.unwrap_or(0)));
    for (id, values) in rows {
        for (j, v) in values.into_iter().enumerate() {
            out[[id, j]] = v;
        }
    }
    Ok(out)
}

pub fn load_pretrained_vectors(path: &Path, vocab: &Vocabulary) -> Result<Array2<f64>, NeuralError> {
    let text = std::fs::read_to_string(path)?;
    parse_pretrained_vectors(&text, vocab)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(words: &[&str]) -> Vocabulary {
        let mut v = Vocabulary::new();
        for w in words {
            v.insert(w);
        }
        v
    }

    #[test]
    fn three_word_file() {
        let v = vocab(&["a", "b", "c", "d"]);
        let m = parse_pretrained_vectors("a 1 2\nb 3 4\nc 5 6\n", &v).unwrap();
        assert_eq!(m.dim(), (v.len(), 2));
        let nonzero = m.rows().into_iter().filter(|r| r.iter().any(|x| *x != 0.0)).count();
        assert_eq!(nonzero, 3);
        assert_eq!(m.row(v.id("b")).to_vec(), vec![3.0, 4.0]);
        assert!(m.row(v.id("d")).iter().all(|x| *x == 0.0));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let v = vocab(&["a"]);
        assert!(matches!(
            parse_pretrained_vectors("a 1 2\nb 1\n", &v),
            Err(NeuralError::InconsistentDimension(2))
        ));
        assert!(matches!(
            parse_pretrained_vectors("a 1 2\n\nb 1 x\n", &v),
            Err(NeuralError::MalformedLine(3))
        ));
        assert!(matches!(parse_pretrained_vectors("a\n", &v), Err(NeuralError::MalformedLine(1))));
    }

    #[test]
    fn bundled_vectors_have_dimension_ten() {
        let words: Vec<&str> = gpsr_core::bundled::VECTORS
            .lines()
            .map(|l| l.split_whitespace().next().unwrap())
            .collect();
        let v = vocab(&words);
        let m = parse_pretrained_vectors(gpsr_core::bundled::VECTORS, &v).unwrap();
        assert_eq!(m.ncols(), 10);
        let first = gpsr_core::bundled::VECTORS.lines().next().unwrap();
        let expect: Vec<f64> = first.split_whitespace().skip(1).map(|x| x.parse().unwrap()).collect();
        assert_eq!(m.row(v.id(words[0])).to_vec(), expect);
        assert_eq!(m.rows().into_iter().filter(|r| r.iter().any(|x| *x != 0.0)).count(), 50);
    }
}

//! Generated-caption corpus mechanics: frame sampling schedules, corpus
//! statistics and train/validation manifests.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_FRAME_SPACING: f64 = 3.6;
pub const DEFAULT_TARGET_FRAMES: usize = 5;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("duration must be positive and finite, got {0}")]
    NonPositiveDuration(f64),
    #[error("frame spacing must be positive and finite, got {0}")]
    NonPositiveSpacing(f64),
    #[error("target frame count must be at least 1")]
    ZeroFrames,
    #[error("split ratio must lie strictly between 0 and 1, got {0}")]
    BadSplitRatio(f64),
    #[error("caption {caption_id:?} references unknown video {video_id:?}")]
    UnknownVideoId { video_id: String, caption_id: String },
    #[error("duplicate video id {0:?}")]
    DuplicateVideo(String),
    #[error("caption {caption_id:?}: frame time {time} outside [0, {duration}]")]
    FrameTimeOutOfRange { caption_id: String, time: f64, duration: f64 },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Frame timestamps for one video: `n = clamp(round(duration / spacing), 1,
/// target_frames)` frames at the centers of `n` equal segments.
pub fn frame_schedule(duration: f64, spacing: f64, target_frames: usize) -> Result<Vec<f64>, DatasetError> {
    if !(duration.is_finite() && duration > 0.0) {
        return Err(DatasetError::NonPositiveDuration(duration));
    }
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(DatasetError::NonPositiveSpacing(spacing));
    }
    if target_frames == 0 {
        return Err(DatasetError::ZeroFrames);
    }
    let n = ((duration / spacing).round() as usize).clamp(1, target_frames);
    let step = duration / n as f64;
    Ok((0..n).map(|i| (i as f64 + 0.5) * step).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Generated,
    Original,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub video_id: String,
    pub duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub video_id: String,
    pub caption_id: String,
    pub text: String,
    pub frame_time: Option<f64>,
    pub origin: Origin,
}

#[derive(Deserialize)]
struct CorpusCaption {
    caption_id: String,
    text: String,
    #[serde(default)]
    frame_time: Option<f64>,
    origin: Origin,
}

#[derive(Deserialize)]
struct CorpusLine {
    video_id: String,
    duration: f64,
    #[serde(default)]
    source_url: Option<String>,
    #[serde(default)]
    captions: Vec<CorpusCaption>,
}

/// A caption corpus: videos and their captions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub videos: Vec<VideoMeta>,
    pub captions: Vec<CaptionRecord>,
}

impl Corpus {
    /// Reads corpus JSONL: one video per line with its nested captions.
    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Corpus, DatasetError> {
        let mut corpus = Corpus::default();
        let mut seen = HashSet::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let wrap = |e: DatasetError| DatasetError::Line { line: line_no, message: e.to_string() };
            let rec: CorpusLine = serde_json::from_str(&line)
                .map_err(|e| DatasetError::Line { line: line_no, message: e.to_string() })?;
            if !(rec.duration.is_finite() && rec.duration > 0.0) {
                return Err(wrap(DatasetError::NonPositiveDuration(rec.duration)));
            }
            if !seen.insert(rec.video_id.clone()) {
                return Err(wrap(DatasetError::DuplicateVideo(rec.video_id)));
            }
            for c in rec.captions {
                if let Some(t) = c.frame_time {
                    if !(0.0..=rec.duration).contains(&t) {
                        return Err(wrap(DatasetError::FrameTimeOutOfRange {
                            caption_id: c.caption_id,
                            time: t,
                            duration: rec.duration,
                        }));
                    }
                }
                corpus.captions.push(CaptionRecord {
                    video_id: rec.video_id.clone(),
                    caption_id: c.caption_id,
                    text: c.text,
                    frame_time: c.frame_time,
                    origin: c.origin,
                });
            }
            corpus.videos.push(VideoMeta { video_id: rec.video_id, duration: rec.duration, source_url: rec.source_url });
        }
        Ok(corpus)
    }

    /// Inverse of `read_jsonl` (captions grouped under their video, video order kept).
    pub fn to_jsonl(&self) -> String {
        let mut by_video: BTreeMap<&str, Vec<&CaptionRecord>> = BTreeMap::new();
        for c in &self.captions {
            by_video.entry(c.video_id.as_str()).or_default().push(c);
        }
        let mut out = String::new();
        for v in &self.videos {
            let caps: Vec<serde_json::Value> = by_video
                .get(v.video_id.as_str())
                .into_iter()
                .flatten()
                .map(|c| {
                    serde_json::json!({
                        "caption_id": c.caption_id,
                        "text": c.text,
                        "frame_time": c.frame_time,
                        "origin": c.origin,
                    })
                })
                .collect();
            let mut line = serde_json::json!({ "video_id": v.video_id, "duration": v.duration, "captions": caps });
            if let Some(url) = &v.source_url {
                line["source_url"] = serde_json::Value::String(url.clone());
            }
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }
}

/// Per-dataset counts: videos, captions, mean whitespace tokens per caption
/// and captions per video.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub num_videos: usize,
    pub num_captions: usize,
    pub avg_tokens_per_caption: f64,
    pub captions_per_video: f64,
    /// Set when there were no captions, in which case both averages are 0.
    pub empty: bool,
}

/// Streaming accumulator behind [`corpus_stats`]; shards merge additively.
#[derive(Debug, Clone, Default)]
pub struct StatsAccumulator {
    videos: HashSet<String>,
    captions: usize,
    tokens: u64,
}

impl StatsAccumulator {
    pub fn add(&mut self, caption: &CaptionRecord) {
        if !self.videos.contains(&caption.video_id) {
            self.videos.insert(caption.video_id.clone());
        }
        self.captions += 1;
        self.tokens += caption.text.split_whitespace().count() as u64;
    }

    pub fn merge(&mut self, other: StatsAccumulator) {
        self.videos.extend(other.videos);
        self.captions += other.captions;
        self.tokens += other.tokens;
    }

    pub fn finish(&self) -> CorpusStats {
        let num_videos = self.videos.len();
        let empty = self.captions == 0;
        CorpusStats {
            num_videos,
            num_captions: self.captions,
            avg_tokens_per_caption: if empty { 0.0 } else { self.tokens as f64 / self.captions as f64 },
            captions_per_video: if num_videos == 0 { 0.0 } else { self.captions as f64 / num_videos as f64 },
            empty,
        }
    }
}

/// Counts videos referenced by the captions, captions, and tokens.
pub fn corpus_stats<'a, I>(captions: I) -> CorpusStats
where
    I: IntoIterator<Item = &'a CaptionRecord>,
{
    let mut acc = StatsAccumulator::default();
    for c in captions {
        acc.add(c);
    }
    acc.finish()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub train: Vec<String>,
    pub val: Vec<String>,
}

impl Manifest {
    pub fn train_text(&self) -> String {
        lines(&self.train)
    }

    pub fn val_text(&self) -> String {
        lines(&self.val)
    }
}

fn lines(ids: &[String]) -> String {
    ids.iter().map(|s| format!("{s}\n")).collect()
}

/// Splits videos into train and validation sets by video id. Ids are sorted,
/// shuffled with a ChaCha8 stream seeded by `seed`, and the first
/// `floor((1 - ratio) * n)` go to validation. Both lists come back sorted.
pub fn emit_manifest(
    videos: &[VideoMeta],
    captions: &[CaptionRecord],
    split_ratio: f64,
    seed: u64,
) -> Result<Manifest, DatasetError> {
    if !(split_ratio > 0.0 && split_ratio < 1.0) {
        return Err(DatasetError::BadSplitRatio(split_ratio));
    }
    let known: BTreeSet<&str> = videos.iter().map(|v| v.video_id.as_str()).collect();
    if known.len() != videos.len() {
        let mut seen = HashSet::new();
        let dup = videos.iter().find(|v| !seen.insert(v.video_id.as_str())).expect("duplicate exists");
        return Err(DatasetError::DuplicateVideo(dup.video_id.clone()));
    }
    if let Some(orphan) = captions.iter().find(|c| !known.contains(c.video_id.as_str())) {
        return Err(DatasetError::UnknownVideoId {
            video_id: orphan.video_id.clone(),
            caption_id: orphan.caption_id.clone(),
        });
    }
    let mut ids: Vec<&str> = known.into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    // the epsilon absorbs representation error in (1 - ratio), e.g. 1 - 0.8
    let n_val = ((1.0 - split_ratio) * ids.len() as f64 + 1e-9).floor() as usize;
    let mut val: Vec<String> = ids[..n_val].iter().map(|s| s.to_string()).collect();
    let mut train: Vec<String> = ids[n_val..].iter().map(|s| s.to_string()).collect();
    val.sort();
    train.sort();
    Ok(Manifest { train, val })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-9)
    }

    #[test]
    fn schedule_examples() {
        let t = frame_schedule(18.0, DEFAULT_FRAME_SPACING, DEFAULT_TARGET_FRAMES).unwrap();
        assert!(close(&t, &[1.8, 5.4, 9.0, 12.6, 16.2]), "{t:?}");
        let t = frame_schedule(2.0, 3.6, 5).unwrap();
        assert!(close(&t, &[1.0]));
        let t = frame_schedule(180.0, 3.6, 5).unwrap();
        assert_eq!(t.len(), 5);
        assert!(t.windows(2).all(|w| (w[1] - w[0] - 36.0).abs() < 1e-9));
        // 9 s / 3.6 s = 2.5 rounds away from zero
        assert_eq!(frame_schedule(9.0, 3.6, 5).unwrap().len(), 3);
    }

    #[test]
    fn schedule_errors() {
        assert!(matches!(frame_schedule(0.0, 3.6, 5), Err(DatasetError::NonPositiveDuration(_))));
        assert!(matches!(frame_schedule(-1.0, 3.6, 5), Err(DatasetError::NonPositiveDuration(_))));
        assert!(matches!(frame_schedule(f64::NAN, 3.6, 5), Err(DatasetError::NonPositiveDuration(_))));
        assert!(matches!(frame_schedule(5.0, 0.0, 5), Err(DatasetError::NonPositiveSpacing(_))));
        assert!(matches!(frame_schedule(5.0, 3.6, 0), Err(DatasetError::ZeroFrames)));
    }

    fn caption(video: &str, id: &str, tokens: usize) -> CaptionRecord {
        CaptionRecord {
            video_id: video.into(),
            caption_id: id.into(),
            text: vec!["word"; tokens].join(" "),
            frame_time: None,
            origin: Origin::Generated,
        }
    }

    #[test]
    fn stats_examples() {
        let caps: Vec<_> = (0..10).map(|i| caption(if i < 5 { "v1" } else { "v2" }, &format!("c{i}"), 10)).collect();
        let s = corpus_stats(&caps);
        assert_eq!((s.num_videos, s.num_captions), (2, 10));
        assert_eq!(s.avg_tokens_per_caption, 10.0);
        assert_eq!(s.captions_per_video, 5.0);
        assert!(!s.empty);

        let s = corpus_stats(std::iter::empty());
        assert_eq!((s.num_videos, s.num_captions, s.avg_tokens_per_caption, s.captions_per_video), (0, 0, 0.0, 0.0));
        assert!(s.empty);

        let mut a = StatsAccumulator::default();
        let mut b = StatsAccumulator::default();
        for (i, c) in caps.iter().enumerate() {
            if i % 3 == 0 { a.add(c) } else { b.add(c) }
        }
        a.merge(b);
        assert_eq!(a.finish(), corpus_stats(&caps));
    }

    fn videos(n: usize) -> Vec<VideoMeta> {
        (0..n).map(|i| VideoMeta { video_id: format!("v{i:02}"), duration: 10.0, source_url: None }).collect()
    }

    #[test]
    fn manifest_split() {
        let vs = videos(10);
        let m = emit_manifest(&vs, &[], 0.8, 7).unwrap();
        assert_eq!((m.train.len(), m.val.len()), (8, 2));
        assert_eq!(emit_manifest(&vs, &[], 0.8, 7).unwrap(), m);
        let all: BTreeSet<_> = m.train.iter().chain(&m.val).collect();
        assert_eq!(all.len(), 10);

        let one = emit_manifest(&videos(1), &[], 0.8, 1).unwrap();
        assert_eq!(one.train, vec!["v00"]);
        assert!(one.val.is_empty());

        let orphan = caption("ghost", "c1", 3);
        assert!(matches!(emit_manifest(&vs, &[orphan], 0.8, 1), Err(DatasetError::UnknownVideoId { .. })));
        assert!(matches!(emit_manifest(&vs, &[], 1.0, 1), Err(DatasetError::BadSplitRatio(_))));
    }

    #[test]
    fn corpus_jsonl_round_trip() {
        let text = r#"{"video_id":"v1","duration":18.0,"captions":[{"caption_id":"c1","text":"a man runs","frame_time":1.8,"origin":"generated"},{"caption_id":"c2","text":"someone jogging","origin":"original"}]}
{"video_id":"v2","duration":4.5,"source_url":"http://x/v2.mp4","captions":[]}
"#;
        let corpus = Corpus::read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(corpus.videos.len(), 2);
        assert_eq!(corpus.captions.len(), 2);
        assert_eq!(corpus.captions[1].origin, Origin::Original);
        assert_eq!(corpus.captions[1].frame_time, None);
        let again = Corpus::read_jsonl(corpus.to_jsonl().as_bytes()).unwrap();
        assert_eq!(again, corpus);

        let bad_time = r#"{"video_id":"v1","duration":2.0,"captions":[{"caption_id":"c1","text":"x","frame_time":3.0,"origin":"generated"}]}"#;
        assert!(matches!(Corpus::read_jsonl(bad_time.as_bytes()), Err(DatasetError::Line { line: 1, .. })));
        let bad_dur = "{\"video_id\":\"v1\",\"duration\":0,\"captions\":[]}";
        assert!(Corpus::read_jsonl(bad_dur.as_bytes()).is_err());
        let dup = "{\"video_id\":\"v1\",\"duration\":1,\"captions\":[]}\n{\"video_id\":\"v1\",\"duration\":1,\"captions\":[]}";
        assert!(matches!(Corpus::read_jsonl(dup.as_bytes()), Err(DatasetError::Line { line: 2, .. })));
    }
}

//! Server-side processing of one decoded frame.

use std::time::Instant;

use crate::classifier::{MlpModel, Prediction, CLASS_LABELS};
use crate::device::{now_us, Configuration};
use crate::dsp::{extract_features, AudioClip, FeatureVector};
use crate::protocol::{AckPayload, AckStatus, Frame, Message, MsgType, ResultPayload};

use super::store::ResultRecord;

/// Reply to send and record to persist before sending it.
#[derive(Debug, Clone, PartialEq)]
pub struct Handled {
    pub reply: Frame,
    pub record: Option<ResultRecord>,
}

/// Identifies the frame being handled. `clip_id` is the per-connection
/// sequence number assigned to AUDIO and FEATURES frames, which carry none.
#[derive(Debug, Clone, Copy)]
pub struct Inbound<'a> {
    pub frame: &'a Frame,
    pub clip_id: u64,
    pub received_us: u64,
}

fn ack(device_id: u32, status: AckStatus, clip_id: u64) -> Frame {
    Message::Ack(AckPayload { status, clip_id }).into_frame(device_id, now_us())
}

pub fn error_reply(device_id: u32, clip_id: u64) -> Frame {
    ack(device_id, AckStatus::Error, clip_id)
}

fn classify(model: &MlpModel, features: &FeatureVector) -> Result<Prediction, String> {
    model.predict(features).map_err(|e| e.to_string())
}

/// AUDIO: extract and classify. FEATURES: classify. RESULT: acknowledge.
/// Invalid payloads or directions are answered with ACK(ERROR).
pub fn handle_message(inbound: Inbound<'_>, model: &MlpModel) -> Handled {
    let start = Instant::now();
    let frame = inbound.frame;
    let device_id = frame.device_id;
    let message = match frame.message() {
        Ok(m) => m,
        Err(e) => {
            log::warn!("device {device_id}: rejecting {:?} frame: {e}", frame.msg_type);
            return Handled { reply: error_reply(device_id, inbound.clip_id), record: None };
        }
    };
    let decided = match &message {
        Message::Audio(a) => AudioClip::from_pcm16(&a.pcm, a.sample_rate)
            .map_err(|e| e.to_string())
            .and_then(|clip| extract_features(&clip).map_err(|e| e.to_string()))
            .and_then(|f| classify(model, &f))
            .map(|p| (Configuration::B, p.class_index as u8, p.confidence as f32, inbound.clip_id)),
        Message::Features(f) => f
            .validate()
            .map_err(|e| e.to_string())
            .and_then(|_| FeatureVector::from_f32(&f.values).map_err(|e| e.to_string()))
            .and_then(|fv| classify(model, &fv))
            .map(|p| (Configuration::C, p.class_index as u8, p.confidence as f32, inbound.clip_id)),
        Message::Result(r) => Ok((Configuration::A, r.class_index, r.confidence, r.clip_id)),
        Message::Ack(_) | Message::Classification(_) => Err(format!("{:?} is a server-to-device message", frame.msg_type)),
    };
    let (config, class_index, confidence, clip_id) = match decided {
        Ok(d) => d,
        Err(e) => {
            log::warn!("device {device_id}: rejecting {:?} frame: {e}", frame.msg_type);
            let clip_id = if let Message::Result(r) = &message { r.clip_id } else { inbound.clip_id };
            return Handled { reply: error_reply(device_id, clip_id), record: None };
        }
    };
    let record = ResultRecord {
        device_id,
        clip_id,
        config,
        label: CLASS_LABELS[usize::from(class_index)].to_string(),
        class_index,
        confidence,
        server_receive_ts_us: inbound.received_us,
        processing_time_us: start.elapsed().as_micros() as u64,
        bytes_received: frame.encoded_len() as u64,
    };
    let reply = match frame.msg_type {
        MsgType::Result => ack(device_id, AckStatus::Ok, clip_id),
        _ => Message::Classification(ResultPayload { class_index, confidence, clip_id }).into_frame(device_id, now_us()),
    };
    Handled { reply, record: Some(record) }
}

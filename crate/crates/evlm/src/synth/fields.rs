//! Field synthesis: per-event junk fields plus the informative values that
//! carry the archetype signal.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::Archetype;
use crate::pipeline::{FieldValue, RawEvent};

/// Device/app attributes that stay constant for one player.
pub struct DeviceProfile {
    os: &'static str,
    model: &'static str,
    app_version: &'static str,
    build_number: f64,
    locale: &'static str,
    ram_mb: f64,
    screen_w: f64,
    screen_h: f64,
    carrier: &'static str,
    install_source: &'static str,
    ab_bucket: f64,
}

const MODELS: [&str; 8] = [
    "SM-G991B", "SM-A525F", "iPhone12,1", "iPhone14,5", "Pixel-6", "Pixel-7a", "M2101K6G",
    "CPH2145",
];
const LOCALES: [&str; 6] = ["en_US", "en_GB", "de_DE", "pt_BR", "ja_JP", "es_MX"];
const CARRIERS: [&str; 5] = ["t-mobile", "vodafone", "verizon", "o2", "docomo"];

impl DeviceProfile {
    pub fn draw(rng: &mut ChaCha8Rng) -> Self {
        let model = MODELS[rng.gen_range(0..MODELS.len())];
        Self {
            os: if model.starts_with("iPhone") { "ios" } else { "android" },
            model,
            app_version: ["8.12.0", "8.12.1", "8.13.0"][rng.gen_range(0..3)],
            build_number: rng.gen_range(41_000..42_000) as f64,
            locale: LOCALES[rng.gen_range(0..LOCALES.len())],
            ram_mb: [3072.0, 4096.0, 6144.0, 8192.0][rng.gen_range(0..4)],
            screen_w: [1080.0, 1170.0, 1440.0][rng.gen_range(0..3)],
            screen_h: [1920.0, 2532.0, 3040.0][rng.gen_range(0..3)],
            carrier: CARRIERS[rng.gen_range(0..CARRIERS.len())],
            install_source: ["store", "ad_campaign", "referral"][rng.gen_range(0..3)],
            ab_bucket: rng.gen_range(0..20) as f64,
        }
    }
}

pub fn session_uuid(rng: &mut ChaCha8Rng) -> String {
    format!("{:016x}{:016x}", rng.gen::<u64>(), rng.gen::<u64>())
}

/// Application-internals noise attached to every event; none of these keys
/// appear in any filter-spec allowlist.
pub fn fill_junk_fields(
    event: &mut RawEvent,
    profile: &DeviceProfile,
    session_uuid: &str,
    rng: &mut ChaCha8Rng,
) {
    let text = |s: &str| FieldValue::Text(s.to_string());
    let f = &mut event.fields;
    f.push(("device_os".into(), text(profile.os)));
    f.push(("device_model".into(), text(profile.model)));
    f.push(("app_version".into(), text(profile.app_version)));
    f.push(("build_number".into(), FieldValue::Number(profile.build_number)));
    f.push(("session_uuid".into(), FieldValue::Text(session_uuid.to_string())));
    f.push((
        "network_type".into(),
        text(if rng.gen::<f64>() < 0.7 { "wifi" } else { "cell" }),
    ));
    f.push(("locale".into(), text(profile.locale)));
    f.push(("battery_pct".into(), FieldValue::Number(rng.gen_range(5..100) as f64)));
    f.push(("ram_mb".into(), FieldValue::Number(profile.ram_mb)));
    f.push(("screen_w".into(), FieldValue::Number(profile.screen_w)));
    f.push(("screen_h".into(), FieldValue::Number(profile.screen_h)));
    f.push(("sdk_version".into(), text("3.4.1")));
    f.push(("carrier".into(), text(profile.carrier)));
    f.push(("os_patch".into(), FieldValue::Number(rng.gen_range(1..30) as f64)));
    f.push(("install_source".into(), text(profile.install_source)));
    f.push(("ab_bucket".into(), FieldValue::Number(profile.ab_bucket)));
    f.push(("log_schema".into(), text("v3")));
    f.push(("client_ts_skew".into(), FieldValue::Number(rng.gen_range(-50..50) as f64)));
}

fn weighted<'a, R: Rng>(rng: &mut R, options: &[(&'a str, f64)]) -> &'a str {
    let total: f64 = options.iter().map(|(_, w)| w).sum();
    let mut u = rng.gen::<f64>() * total;
    for (name, w) in options {
        u -= w;
        if u <= 0.0 {
            return name;
        }
    }
    options.last().expect("non-empty options").0
}

/// Value distributions are functions of the archetype parameters, so each
/// informative field carries segment signal the analysis stage can recover.
pub fn fill_informative_fields(
    event: &mut RawEvent,
    archetype: &Archetype,
    session_start_ms: i64,
    rng: &mut ChaCha8Rng,
) {
    let text = |s: &str| FieldValue::Text(s.to_string());
    let skill = 1.0 - archetype.p_len; // long-session players play better
    match event.class.as_str() {
        "app_start" => {
            let source = weighted(rng, &[("icon", 0.85), ("notification", 0.1), ("deeplink", 0.05)]);
            event.fields.push(("source".into(), text(source)));
        }
        "app_end" => {
            let duration_s = ((event.ts_ms - session_start_ms) / 1000).max(1) as f64;
            event.fields.push(("duration_s".into(), FieldValue::Number(duration_s)));
        }
        "round_start" => {
            let mode = if archetype.p_len <= 0.15 {
                weighted(rng, &[("classic", 0.9), ("challenge", 0.07), ("timed", 0.03)])
            } else if archetype.p_len <= 0.3 {
                weighted(rng, &[("classic", 0.15), ("challenge", 0.7), ("timed", 0.15)])
            } else {
                weighted(rng, &[("classic", 0.05), ("challenge", 0.15), ("timed", 0.8)])
            };
            event.fields.push(("mode".into(), text(mode)));
        }
        "round_end" => {
            let win_p = 0.1 + 0.8 * skill;
            let result = if rng.gen::<f64>() < win_p { "win" } else { "lose" };
            event.fields.push(("result".into(), text(result)));
            let base = 15.0 / archetype.p_len;
            let duration = base * (0.75 + 0.5 * rng.gen::<f64>());
            event
                .fields
                .push(("duration_s".into(), FieldValue::Number(duration.round())));
        }
        "level_up" => {
            let level = 5.0 + 60.0 * (1.0 - archetype.p_act) + rng.gen_range(0..10) as f64;
            event.fields.push(("new_level".into(), FieldValue::Number(level.round())));
        }
        "purchase" => {
            let premium = archetype.purchase_propensity;
            let item_kind = weighted(
                rng,
                &[
                    ("gem_pack", 0.05 + 2.0 * premium),
                    ("booster", 0.2),
                    ("coin_pack", 1.0 - 0.9 * premium),
                ],
            );
            let item = format!("{item_kind}_{}", rng.gen_range(1..9));
            event.fields.push(("item".into(), FieldValue::Text(item)));
            let tier = 1.0 + (premium * 2.0 + rng.gen::<f64>() * 0.8).floor().min(2.0);
            event.fields.push(("price_tier".into(), FieldValue::Number(tier)));
        }
        "reward_claim" => {
            let chesty = 0.1 + 0.8 * archetype.social_propensity;
            let reward = weighted(
                rng,
                &[("coins", 0.55), ("chest", chesty), ("booster", 0.12), ("gem", 0.08)],
            );
            event.fields.push(("reward".into(), text(reward)));
        }
        "social_activity" => {
            let n = rng.gen_range(1..99);
            let kind = weighted(
                rng,
                &[("friend_gift", 0.4), ("friend_invite", 0.2), ("guild_chat", 0.3), ("clan_war", 0.1)],
            );
            event
                .fields
                .push(("action_id".into(), FieldValue::Text(format!("{kind}_{n}"))));
        }
        "quest_start" => {
            let quest = weighted(
                rng,
                &[
                    ("daily", 0.2 + archetype.p_act),
                    ("story", 0.3),
                    ("event", 0.05 + 2.0 * archetype.social_propensity),
                ],
            );
            event.fields.push(("quest_type".into(), text(quest)));
        }
        "quest_complete" => {
            let reward = weighted(rng, &[("xp", 0.7), ("coins", 0.2), ("gem", 0.1)]);
            event.fields.push(("reward".into(), text(reward)));
        }
        "popup" => {
            let kind = weighted(
                rng,
                &[
                    ("offer", 0.1 + 2.0 * archetype.purchase_propensity),
                    ("news", 0.35),
                    ("rate", 0.1),
                ],
            );
            event.fields.push(("popup_kind".into(), text(kind)));
        }
        "notification" => {
            let channel = weighted(rng, &[("push", 0.9), ("inbox", 0.1)]);
            event.fields.push(("channel".into(), text(channel)));
        }
        other => unreachable!("unknown event class {other}"),
    }
}

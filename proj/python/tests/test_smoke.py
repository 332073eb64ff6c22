import glob
import json
import os
import random

import pytest

import groundchat


def test_chat_prompt_golden():
    assert groundchat.render_chat_prompt("What is the image?", image=True) == (
        "###Human: <Vision><ModalityHere></Vision> What is the image? ###Assistant:"
    )
    assert groundchat.render_chat_prompt(
        "Are the audio and image related to each other? What are they?", image=True, audio=True
    ) == (
        "###Human: <Vision><ModalityHere></Vision> <Audio><ModalityHere></Audio> "
        "Are the audio and image related to each other? What are they? ###Assistant:"
    )


def test_chat_prompt_needs_a_modality():
    with pytest.raises(groundchat.GroundchatError) as err:
        groundchat.render_chat_prompt("Hello.")
    assert err.value.kind == "precondition"
    assert groundchat.render_chat_prompt("Hello.", allow_text_only=True) == "###Human: Hello. ###Assistant:"


def test_matching_prompt_payload():
    system, user = groundchat.matching_prompt(["dog", "frisbee"], "A dog catches a frisbee.")
    assert user == "<List>dog, frisbee</List>,<Text>A dog catches a frisbee.</Text>"
    assert "->" in system


def test_loss_boundary():
    tokens = ["###", "Human", ":", " hi", " ###", "Assistant", ":", " yes"]
    assert groundchat.response_loss_boundary(tokens) == 7


def test_mask_runs_round_trip():
    rng = random.Random(5)
    for _ in range(50):
        w, h = rng.randint(1, 12), rng.randint(1, 12)
        bits = bytes(rng.randint(0, 1) for _ in range(w * h))
        runs = groundchat.mask_to_runs(w, h, bits)
        assert sum(runs) == w * h
        assert groundchat.mask_from_runs(w, h, runs) == bits


def test_ground_dog_fixture(fixtures, dog_png):
    result = groundchat.ground(dog_png, "A dog catches a frisbee on the grass.", mocks=fixtures["mocks"])
    labels = sorted(e["label"] for e in result["entities"])
    assert labels == ["dog", "frisbee"]
    assert len(result["matches"]) == 2
    again = groundchat.ground(dog_png, "A dog catches a frisbee on the grass.", mocks=fixtures["mocks"])
    assert json.dumps(result, sort_keys=True) == json.dumps(again, sort_keys=True)
    no_text = groundchat.ground(dog_png, mocks=fixtures["mocks"])
    assert no_text["matches"] == []


def test_ground_rejects_non_images(fixtures):
    with pytest.raises(groundchat.GroundchatError) as err:
        groundchat.ground(b"not an image", "x", mocks=fixtures["mocks"])
    assert err.value.status == 422


def _records(manifest_path, media_root):
    with open(manifest_path) as f:
        manifest = json.load(f)
    out = []
    with open(os.path.join(os.path.dirname(manifest_path), manifest["records_file"])) as f:
        for line in f:
            r = json.loads(line)
            digest = r["media"]["digest"]
            with open(glob.glob(os.path.join(media_root, digest[:2], digest + ".*"))[0], "rb") as m:
                out.append({"media": m.read(), "caption": r["caption"], "source_id": r["source_id"]})
    return out


def test_negative_pairs_deterministic_and_valid(fixtures):
    audio = _records(fixtures["audio_captions"], fixtures["media"])
    images = _records(fixtures["image_captions"], fixtures["media"])
    a = groundchat.build_negative_pairs(audio, images, count=20, seed=7)
    b = groundchat.build_negative_pairs(audio, images, count=20, seed=7)
    assert a == b
    assert len(a) == 20
    for sample in a:
        assert groundchat.validate_sample(sample) == []
        assert sample["response"].startswith("The image")
        assert ". The audio" in sample["response"]
        assert sample["related"] is False


def test_model_train_keeps_frozen_groups(dog_png):
    model = groundchat.Model({"queries": 4, "llm_dim": 32, "qformer_dim": 16})
    data = [{"media": dog_png, "caption": "A dog on a lawn."}]
    report = model.train("stage1-vision", data, steps=5, batch_size=1)
    assert report["steps"] == 5
    assert len(report["log"]) == 5
    before, after = report["hashes_before"], report["hashes_after"]
    assert before["llm"] == after["llm"]
    assert before["audio_projection"] == after["audio_projection"]
    assert before["vision_projection"] != after["vision_projection"]


def test_model_checkpoint_round_trip(tmp_path, dog_png):
    model = groundchat.Model({"queries": 4, "llm_dim": 32, "qformer_dim": 16})
    model.train("stage1-vision", [{"media": dog_png, "caption": "A dog."}], steps=3, batch_size=1)
    path = str(tmp_path / "heads.gchk")
    model.save(path)
    fresh = groundchat.Model({"queries": 4, "llm_dim": 32, "qformer_dim": 16})
    assert fresh.group_hashes() != model.group_hashes()
    fresh.load(path)
    assert fresh.group_hashes() == model.group_hashes()
    reply = fresh.respond("What is the image?", image=dog_png, max_new_tokens=8)
    assert reply == model.respond("What is the image?", image=dog_png, max_new_tokens=8)


def test_chat_service_round_trip(fixtures, dog_png, clip_wav):
    with open(fixtures["config"]) as f:
        config = json.load(f)
    config["adapters"]["mocks"] = fixtures["mocks"]
    chat = groundchat.ChatService(config)
    sid = chat.create_session()
    reply = chat.post_message(sid, "What is the image?", image=dog_png)
    assert reply["text"]
    assert len(reply["mask_ids"]) == len(reply["grounding"]["entities"]) > 0
    png = chat.get_mask(sid, reply["mask_ids"][0])
    assert png.startswith(b"\x89PNG")
    both = chat.post_message(sid, "Are the audio and image related to each other? What are they?", image=dog_png, audio=clip_wav)
    assert "related_verdict" in both
    assert len(chat.get_session(sid)["turns"]) == 4

    with pytest.raises(groundchat.GroundchatError) as err:
        chat.post_message("missing", "hi", image=dog_png)
    assert err.value.status == 404
    chat.set_llm_available(False)
    with pytest.raises(groundchat.GroundchatError) as err:
        chat.post_message(sid, "What is the image?", image=dog_png)
    assert err.value.status == 503
    assert len(chat.get_session(sid)["turns"]) == 4

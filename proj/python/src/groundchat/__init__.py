"""Grounded multimodal chat: prompts, grounding, toy training, datasets and the chat service."""

from ._groundchat import (
    ChatService,
    GroundchatError,
    Model,
    build_negative_pairs,
    ground,
    mask_from_runs,
    mask_to_runs,
    matching_prompt,
    render_chat_prompt,
    response_loss_boundary,
    validate_sample,
    write_fixtures,
)

__all__ = [
    "ChatService",
    "GroundchatError",
    "Model",
    "build_negative_pairs",
    "ground",
    "mask_from_runs",
    "mask_to_runs",
    "matching_prompt",
    "render_chat_prompt",
    "response_loss_boundary",
    "validate_sample",
    "write_fixtures",
]

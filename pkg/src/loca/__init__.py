"""LoCA regret benchmark."""

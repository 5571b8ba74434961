"""Tests for ffts-eso."""

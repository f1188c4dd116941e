"""Typed core calculus with assume/weight/infer, diff and solve."""

from django.urls import path

from . import views

urlpatterns = [
    path('api/runs/', views.api_run_list, name='run_list'),
    path('api/runs/<int:run_id>/', views.api_run_detail, name='run_detail'),
]
